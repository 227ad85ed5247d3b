#!/usr/bin/env node
/** Command line front end: figures <fig-id> --in <dir> --out <file>.
 *
 * Picks up the simulator's CSV result files from the input directory by
 * their conventional names, renders the requested figure, and reports
 * the embedded checksum. Input problems exit with status 1 and a
 * message; bad usage exits with status 2.
 */

import { existsSync, readdirSync, realpathSync } from "node:fs";
import { join } from "node:path";
import { pathToFileURL } from "node:url";

import { FIGURE_IDS, FigureError, isFigureId } from "./types.js";
import type { FigureId } from "./types.js";
import { render } from "./figures.js";

const USAGE = `usage: figures <${FIGURE_IDS.join("|")}> --in <dir> --out <file>`;

const FIXED_INPUTS: Partial<Record<FigureId, string>> = {
  fig4: "loss.csv",
  fig6: "constellation.csv",
  fig7: "users.csv",
  fig8: "timing.csv",
};

/** The CSV files a figure needs, located inside `dir` by name. */
export function discoverInputs(figure: FigureId, dir: string): string[] {
  const fixed = FIXED_INPUTS[figure];
  if (fixed !== undefined) {
    const path = join(dir, fixed);
    if (!existsSync(path)) {
      throw new FigureError(`${dir}: expected ${fixed} for ${figure}`);
    }
    return [path];
  }
  const pattern = figure === "fig5" ? /^ber_[a-z0-9]+\.csv$/ : /^ber_[a-z0-9]+_icsi_[0-9eE+.-]+\.csv$/;
  const wanted = figure === "fig5" ? "ber_<algorithm>.csv" : "ber_<algorithm>_icsi_<sigma>.csv";
  let names: string[];
  try {
    names = readdirSync(dir);
  } catch (err) {
    throw new FigureError(`${dir}: cannot list directory (${(err as Error).message})`);
  }
  const found = names.filter((name) => pattern.test(name)).sort();
  if (found.length === 0) {
    throw new FigureError(`${dir}: no ${wanted} files for ${figure}`);
  }
  return found.map((name) => join(dir, name));
}

interface Args {
  figure: FigureId;
  inDir: string;
  outFile: string;
}

class UsageError extends Error {}

function parseArgs(argv: string[]): Args {
  let figure: FigureId | undefined;
  let inDir: string | undefined;
  let outFile: string | undefined;
  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i]!;
    if (arg === "--in" || arg === "--out") {
      const value = argv[i + 1];
      if (value === undefined) {
        throw new UsageError(`${arg} needs a value`);
      }
      if (arg === "--in") {
        inDir = value;
      } else {
        outFile = value;
      }
      i += 1;
    } else if (arg === "--help" || arg === "-h") {
      throw new UsageError("");
    } else if (arg.startsWith("-")) {
      throw new UsageError(`unknown option ${arg}`);
    } else if (figure === undefined) {
      if (!isFigureId(arg)) {
        throw new UsageError(`unknown figure '${arg}'`);
      }
      figure = arg;
    } else {
      throw new UsageError(`unexpected argument ${arg}`);
    }
  }
  if (figure === undefined || inDir === undefined || outFile === undefined) {
    throw new UsageError("a figure id, --in, and --out are all required");
  }
  return { figure, inDir, outFile };
}

/** Run the command line with the given arguments; returns the exit
 * status instead of exiting so tests can call it directly. */
export function run(argv: string[], log = console.log, warn = console.error): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      if (err.message !== "") {
        warn(`error: ${err.message}`);
      }
      warn(USAGE);
      return err.message === "" ? 0 : 2;
    }
    throw err;
  }
  try {
    const inputs = discoverInputs(args.figure, args.inDir);
    const result = render({ figure: args.figure, inputs, output: args.outFile });
    log(`wrote ${args.outFile}: ${result.pointCount} points, checksum ${result.checksum}`);
    return 0;
  } catch (err) {
    if (err instanceof FigureError) {
      warn(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

function invokedDirectly(): boolean {
  const invokedPath = process.argv[1];
  if (invokedPath === undefined) {
    return false;
  }
  try {
    return import.meta.url === pathToFileURL(realpathSync(invokedPath)).href;
  } catch {
    return false;
  }
}

if (invokedDirectly()) {
  process.exit(run(process.argv.slice(2)));
}

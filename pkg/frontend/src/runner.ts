/** Subprocess wrapper for the `convaug` command-line tool. */

import { spawnSync } from "node:child_process";

/** Exit codes the CLI guarantees: 0 ok, 1 validation/scoring, 2 I/O. */
export const EXIT_INVALID = 1;
export const EXIT_IO = 2;

export interface RunnerOptions {
  /** Executable to invoke; defaults to $CONVAUG_BIN, then "convaug". */
  bin?: string;
  cwd?: string;
}

export class CliError extends Error {
  constructor(
    message: string,
    public readonly exitCode: number,
    public readonly stderr: string,
  ) {
    super(message);
  }
}

export function convaugBin(opts?: RunnerOptions): string {
  return opts?.bin ?? process.env.CONVAUG_BIN ?? "convaug";
}

/** Run one subcommand, returning stdout; nonzero exit raises CliError. */
export function runConvaug(args: string[], opts?: RunnerOptions): string {
  const bin = convaugBin(opts);
  const proc = spawnSync(bin, args, {
    cwd: opts?.cwd,
    encoding: "utf-8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (proc.error) {
    throw new CliError(`failed to launch ${bin}: ${proc.error.message}`, -1, "");
  }
  if (proc.status !== 0) {
    const stderr = proc.stderr ?? "";
    throw new CliError(
      `${bin} ${args[0]} exited ${proc.status}: ${stderr.trim()}`,
      proc.status ?? -1,
      stderr,
    );
  }
  return proc.stdout ?? "";
}

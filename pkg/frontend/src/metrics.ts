/** Scoring via the CLI's evaluate subcommand and its JSON report. */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { CLI_TASK, Split, Task } from "./manifest";
import { RunnerOptions, runConvaug } from "./runner";

export interface ScoreReport {
  task: Task;
  metric_name: "mAP" | "accuracy" | "UAR";
  value: number;
  /** Per-class values; null marks classes skipped for lack of positives. */
  per_class: Array<number | null>;
  warnings: string[];
}

/**
 * Score a prediction file against a labeled manifest split.
 *
 * Values come from the CLI's JSON report; JSON.parse returns the exact IEEE-754
 * double the scorer computed (shortest-round-trip encoding on both sides).
 */
export function evaluate(
  manifestPath: string,
  predictionsPath: string,
  task: Task,
  split: Split,
  opts?: RunnerOptions,
): ScoreReport {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "convaug-report-"));
  try {
    const out = path.join(dir, "report.json");
    runConvaug(
      [
        "evaluate",
        "--manifest", manifestPath,
        "--task", CLI_TASK[task],
        "--split", split,
        "--predictions", predictionsPath,
        "--out", out,
      ],
      opts,
    );
    return JSON.parse(fs.readFileSync(out, "utf-8")) as ScoreReport;
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

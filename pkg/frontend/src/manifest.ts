/** Writers for the CSV artifacts the CLI consumes: manifests and predictions. */

import * as fs from "node:fs";

export const MANIFEST_HEADER = "sample_id,task,split,view_order,media,labels";

export type Task = "bodily" | "eye_contact" | "next_speaker";
export type Split = "train" | "val" | "test";

/** Short CLI aliases for the canonical task tokens. */
export const CLI_TASK: Record<Task, string> = {
  bodily: "bodily",
  eye_contact: "eye",
  next_speaker: "speaker",
};

export interface ManifestRow {
  sampleId: string;
  task: Task;
  split: Split;
  /** View tags in presentation order. */
  viewOrder: string[];
  /** tag -> clip directory relative to the frames root. */
  media: Record<string, string>;
  /**
   * Task-shaped labels: 14 bits (bodily), one class id 0..3 (eye_contact),
   * or one bit per view (next_speaker). Empty for test rows.
   */
  labels: number[] | number | null;
}

function formatLabels(row: ManifestRow): string {
  if (row.labels === null) return "";
  if (typeof row.labels === "number") return String(row.labels);
  return row.labels.join("|");
}

export function formatManifestRow(row: ManifestRow): string {
  const media = row.viewOrder.map((tag) => `${tag}=${row.media[tag]}`).join("|");
  return [
    row.sampleId,
    row.task,
    row.split,
    row.viewOrder.join("|"),
    media,
    formatLabels(row),
  ].join(",");
}

export function writeManifest(path: string, rows: ManifestRow[]): void {
  const lines = [MANIFEST_HEADER, ...rows.map(formatManifestRow)];
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

/** Score predictions for bodily / next_speaker: sample_id,s0,...,s{K-1}. */
export function writeScorePredictions(
  path: string,
  rows: Array<{ sampleId: string; scores: number[] }>,
): void {
  const width = rows[0]?.scores.length ?? 0;
  if (width === 0) throw new Error("need at least one row with scores");
  const header = ["sample_id", ...Array.from({ length: width }, (_, i) => `s${i}`)];
  const lines = [header.join(",")];
  for (const row of rows) {
    if (row.scores.length !== width) {
      throw new Error(`row ${row.sampleId}: expected ${width} scores, got ${row.scores.length}`);
    }
    lines.push([row.sampleId, ...row.scores.map(String)].join(","));
  }
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

/** Class-label predictions for eye_contact: sample_id,label. */
export function writeLabelPredictions(
  path: string,
  rows: Array<{ sampleId: string; label: number }>,
): void {
  const lines = ["sample_id,label", ...rows.map((r) => `${r.sampleId},${r.label}`)];
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

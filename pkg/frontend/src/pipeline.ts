/**
 * Single-image pipeline driver: routes one RGB image through the CLI's
 * preprocess path (bodily task, no crop, single frame) and returns the
 * resulting tensor, so augmentation results are byte-identical to any other
 * consumer of the same seed + sample id.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { decodeBlob, Tensor } from "./blob";
import { writeManifest } from "./manifest";
import { encodePpm, RawImage } from "./ppm";
import { RunnerOptions, runConvaug } from "./runner";

export interface PipelineOptions extends RunnerOptions {
  /** Augmentation pipeline YAML; omit for the identity pipeline. */
  augConfig?: string;
  /** Overrides the config's global seed. */
  seed?: number;
  /** Identity fed into per-sample seed derivation. Default "sample". */
  sampleId?: string;
}

const TRAIN_LABELS = Array.from({ length: 14 }, (_, i) => (i === 0 ? 1 : 0));

/** Write the one-sample fixture tree the CLI expects. Returns the work dir. */
export function stageImage(img: RawImage, sampleId: string, dir: string): void {
  const clipDir = path.join(dir, "frames", "clip", "cam1");
  fs.mkdirSync(clipDir, { recursive: true });
  fs.writeFileSync(path.join(clipDir, "frame_000001.ppm"), encodePpm(img));
  writeManifest(path.join(dir, "manifest.csv"), [
    {
      sampleId,
      task: "bodily",
      split: "train",
      viewOrder: ["cam1"],
      media: { cam1: "clip/cam1" },
      labels: TRAIN_LABELS,
    },
  ]);
}

/** Run one image through preprocess (+ optional augmentation); returns [1,H,W,3]. */
export function processImageTensor(img: RawImage, opts?: PipelineOptions): Tensor {
  const sampleId = opts?.sampleId ?? "sample";
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "convaug-client-"));
  try {
    stageImage(img, sampleId, dir);
    const args = [
      "preprocess",
      "--manifest", path.join(dir, "manifest.csv"),
      "--task", "bodily",
      "--frames-root", path.join(dir, "frames"),
      "--out", path.join(dir, "out"),
      "--crop", "0,0",
      "--sample", "last1",
    ];
    if (opts?.augConfig !== undefined) args.push("--aug-config", opts.augConfig);
    if (opts?.seed !== undefined) args.push("--seed", String(opts.seed));
    runConvaug(args, opts);
    const blob = fs.readFileSync(
      path.join(dir, "out", "bodily", "train", `${sampleId}.ctns`),
    );
    return decodeBlob(blob);
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

/** Like processImageTensor, but unwraps the singleton frame axis to an image. */
export function processImage(img: RawImage, opts?: PipelineOptions): RawImage {
  const tensor = processImageTensor(img, opts);
  const [t, h, w, c] = tensor.dims;
  if (tensor.dims.length !== 4 || t !== 1 || c !== 3 || tensor.dtype !== "u8") {
    throw new Error(`expected a [1,H,W,3] u8 tensor, got ${tensor.dtype} [${tensor.dims}]`);
  }
  return { height: h!, width: w!, data: tensor.data as Uint8Array };
}

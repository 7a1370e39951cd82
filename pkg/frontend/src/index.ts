export { BlobDType, BlobFormatError, Tensor, decodeBlob, encodeBlob } from "./blob";
export { RawImage, decodePpm, encodePpm } from "./ppm";
export {
  CLI_TASK,
  MANIFEST_HEADER,
  ManifestRow,
  Split,
  Task,
  formatManifestRow,
  writeLabelPredictions,
  writeManifest,
  writeScorePredictions,
} from "./manifest";
export { CliError, EXIT_INVALID, EXIT_IO, RunnerOptions, convaugBin, runConvaug } from "./runner";
export { PipelineOptions, processImage, processImageTensor, stageImage } from "./pipeline";
export { ScoreReport, evaluate } from "./metrics";

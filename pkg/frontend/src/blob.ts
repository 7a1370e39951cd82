/**
 * Tensor-blob codec (`.ctns` files).
 *
 * Little-endian layout, 7 + 4*ndim header bytes followed by the payload:
 *
 *   offset 0, 4 bytes: magic "CTNS"
 *   offset 4, 1 byte : version (1)
 *   offset 5, 1 byte : dtype (0 = u8, 1 = f32 LE)
 *   offset 6, 1 byte : ndim (1..5)
 *   offset 7, 4*ndim : u32 LE dims, outermost first
 *   then             : payload, C row-major, dims product * itemsize bytes
 */

const MAGIC = Buffer.from("CTNS", "ascii");
const VERSION = 1;
const MAX_NDIM = 5;

export type BlobDType = "u8" | "f32";

export interface Tensor {
  dtype: BlobDType;
  dims: number[];
  /** Flat C row-major payload; length must equal the product of dims. */
  data: Uint8Array | Float32Array;
}

export class BlobFormatError extends Error {}

function elementCount(dims: number[]): number {
  if (dims.length < 1 || dims.length > MAX_NDIM) {
    throw new BlobFormatError(`ndim must be 1..${MAX_NDIM}, got ${dims.length}`);
  }
  let n = 1;
  for (const d of dims) {
    if (!Number.isInteger(d) || d < 1 || d > 0xffffffff) {
      throw new BlobFormatError(`bad dimension ${d}`);
    }
    n *= d;
  }
  return n;
}

/** Serialize a tensor to the blob wire format. */
export function encodeBlob(tensor: Tensor): Buffer {
  const count = elementCount(tensor.dims);
  if (tensor.data.length !== count) {
    throw new BlobFormatError(
      `payload has ${tensor.data.length} elements, dims imply ${count}`,
    );
  }
  const isU8 = tensor.dtype === "u8";
  if (isU8 !== tensor.data instanceof Uint8Array) {
    throw new BlobFormatError(`dtype ${tensor.dtype} does not match the payload array type`);
  }
  const header = Buffer.alloc(7 + 4 * tensor.dims.length);
  MAGIC.copy(header, 0);
  header.writeUInt8(VERSION, 4);
  header.writeUInt8(isU8 ? 0 : 1, 5);
  header.writeUInt8(tensor.dims.length, 6);
  tensor.dims.forEach((d, i) => header.writeUInt32LE(d, 7 + 4 * i));

  if (isU8) {
    return Buffer.concat([header, Buffer.from(tensor.data as Uint8Array)]);
  }
  // f32 payload: explicit LE writes so the bytes are platform-independent
  const payload = Buffer.alloc(4 * count);
  const f32 = tensor.data as Float32Array;
  for (let i = 0; i < count; i++) payload.writeFloatLE(f32[i]!, 4 * i);
  return Buffer.concat([header, payload]);
}

/** Parse a blob, rejecting bad magic/version/dtype/ndim and size mismatches. */
export function decodeBlob(buf: Buffer): Tensor {
  if (buf.length < 7 || !buf.subarray(0, 4).equals(MAGIC)) {
    throw new BlobFormatError("bad magic, expected CTNS");
  }
  const version = buf.readUInt8(4);
  if (version !== VERSION) {
    throw new BlobFormatError(`unsupported version ${version}`);
  }
  const dtypeByte = buf.readUInt8(5);
  if (dtypeByte !== 0 && dtypeByte !== 1) {
    throw new BlobFormatError(`unknown dtype byte ${dtypeByte}`);
  }
  const ndim = buf.readUInt8(6);
  if (ndim < 1 || ndim > MAX_NDIM) {
    throw new BlobFormatError(`ndim must be 1..${MAX_NDIM}, got ${ndim}`);
  }
  const headerLen = 7 + 4 * ndim;
  if (buf.length < headerLen) {
    throw new BlobFormatError("truncated header");
  }
  const dims: number[] = [];
  for (let i = 0; i < ndim; i++) {
    const d = buf.readUInt32LE(7 + 4 * i);
    if (d < 1) throw new BlobFormatError(`dimension ${i} is zero`);
    dims.push(d);
  }
  const count = dims.reduce((a, b) => a * b, 1);
  const itemSize = dtypeByte === 0 ? 1 : 4;
  const expected = headerLen + count * itemSize;
  if (buf.length !== expected) {
    throw new BlobFormatError(`expected ${expected} bytes total, got ${buf.length}`);
  }
  if (dtypeByte === 0) {
    return { dtype: "u8", dims, data: Uint8Array.from(buf.subarray(headerLen)) };
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(headerLen + 4 * i);
  return { dtype: "f32", dims, data };
}

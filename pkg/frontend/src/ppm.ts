/** Binary PPM (P6, maxval 255) encode/decode for RGB images. */

export interface RawImage {
  height: number;
  width: number;
  /** RGB bytes, row-major, length = height * width * 3. */
  data: Uint8Array;
}

export function encodePpm(img: RawImage): Buffer {
  if (img.data.length !== img.height * img.width * 3) {
    throw new Error(
      `pixel buffer has ${img.data.length} bytes, shape implies ${img.height * img.width * 3}`,
    );
  }
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(img.data)]);
}

export function decodePpm(buf: Buffer): RawImage {
  // header: "P6", whitespace-separated width/height/maxval, one byte, payload
  const text = buf.subarray(0, 64).toString("latin1");
  const m = /^P6\s+(\d+)\s+(\d+)\s+(\d+)\s/.exec(text);
  if (!m) throw new Error("not a binary PPM (P6) image");
  const width = Number(m[1]);
  const height = Number(m[2]);
  if (Number(m[3]) !== 255) throw new Error(`unsupported maxval ${m[3]}`);
  const offset = m[0].length;
  const expected = offset + width * height * 3;
  if (buf.length !== expected) {
    throw new Error(`expected ${expected} bytes, got ${buf.length}`);
  }
  return { height, width, data: Uint8Array.from(buf.subarray(offset)) };
}

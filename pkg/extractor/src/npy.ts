/**
 * Writer for the tensor exchange format consumed by the analysis pipeline:
 * NPY v1.0 restricted to little-endian f4/f8, row-major order.
 *
 * The preamble layout is fixed: 6-byte magic, 2 version bytes, a uint16
 * little-endian header length, then the header dict padded with spaces so
 * the whole preamble is a multiple of 64 bytes and ends in a newline.
 */

const MAGIC = Buffer.from([0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59]); // \x93NUMPY
const VERSION = Buffer.from([0x01, 0x00]);
const HEADER_ALIGN = 64;

export type NpyDtype = 'f4' | 'f8';

/** Python-tuple repr of a shape: (), (2,), (2, 3). */
function shapeRepr(shape: number[]): string {
  if (shape.length === 0) return '()';
  if (shape.length === 1) return `(${shape[0]},)`;
  return `(${shape.join(', ')})`;
}

export function encodeNpy(
  data: Float32Array | Float64Array | number[],
  shape: number[],
  dtype: NpyDtype = 'f4',
): Buffer {
  const count = shape.reduce((a, b) => a * b, 1);
  if (shape.some(d => !Number.isInteger(d) || d < 1)) {
    throw new Error(`tensor dimensions must be positive integers, got [${shape}]`);
  }
  const values = Array.isArray(data) ? data : data;
  if (values.length !== count) {
    throw new Error(`shape [${shape}] needs ${count} elements, got ${values.length}`);
  }
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new Error(`non-finite value at flat index ${i}`);
    }
  }

  const descr = dtype === 'f4' ? '<f4' : '<f8';
  let header = `{'descr': '${descr}', 'fortran_order': False, 'shape': ${shapeRepr(shape)}, }`;
  const pad = HEADER_ALIGN - ((10 + header.length + 1) % HEADER_ALIGN);
  header = header + ' '.repeat(pad) + '\n';

  const headerLen = Buffer.alloc(2);
  headerLen.writeUInt16LE(header.length, 0);

  const itemSize = dtype === 'f4' ? 4 : 8;
  const payload = Buffer.alloc(count * itemSize);
  for (let i = 0; i < count; i++) {
    const v = typeof values[i] === 'number' ? (values[i] as number) : Number(values[i]);
    if (dtype === 'f4') {
      const asF4 = Math.fround(v);
      if (!Number.isFinite(asF4)) {
        throw new Error(`value ${v} overflows f4; write as f8 instead`);
      }
      payload.writeFloatLE(v, i * 4);
    } else {
      payload.writeDoubleLE(v, i * 8);
    }
  }

  return Buffer.concat([MAGIC, VERSION, headerLen, Buffer.from(header, 'latin1'), payload]);
}

/**
 * Minimal reader for round-trip checks. Accepts only what encodeNpy emits;
 * the Python side owns the full strict parser.
 */
export function decodeNpy(buf: Buffer): { shape: number[]; dtype: NpyDtype; data: Float64Array } {
  if (!buf.subarray(0, 6).equals(MAGIC)) throw new Error('bad magic');
  if (!buf.subarray(6, 8).equals(VERSION)) throw new Error('unsupported version');
  const headerLen = buf.readUInt16LE(8);
  const header = buf.subarray(10, 10 + headerLen).toString('latin1');

  const descrMatch = header.match(/'descr':\s*'([^']+)'/);
  const orderMatch = header.match(/'fortran_order':\s*(True|False)/);
  const shapeMatch = header.match(/'shape':\s*\(([^)]*)\)/);
  if (!descrMatch || !orderMatch || !shapeMatch) throw new Error('malformed header');
  if (orderMatch[1] !== 'False') throw new Error('column-major not supported');
  const descr = descrMatch[1];
  if (descr !== '<f4' && descr !== '<f8') throw new Error(`unsupported dtype ${descr}`);
  const dtype: NpyDtype = descr === '<f4' ? 'f4' : 'f8';

  const shape = shapeMatch[1]
    .split(',')
    .map(s => s.trim())
    .filter(s => s.length > 0)
    .map(Number);
  const count = shape.reduce((a, b) => a * b, 1);
  const payload = buf.subarray(10 + headerLen);
  const itemSize = dtype === 'f4' ? 4 : 8;
  if (payload.length !== count * itemSize) throw new Error('payload length mismatch');

  const data = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = dtype === 'f4' ? payload.readFloatLE(i * 4) : payload.readDoubleLE(i * 8);
  }
  return { shape, dtype, data };
}

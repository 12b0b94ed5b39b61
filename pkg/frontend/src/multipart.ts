/** Deterministic multipart/form-data builder for uploads.
 *
 * Both upload paths (drag-and-drop and the file picker) funnel into this
 * one builder, and the output is a pure function of the file contents:
 * parts are ordered by (filename, content digest) and the boundary is
 * derived from a digest of the parts, so the same files produce the same
 * bytes no matter how they were handed over or in which order. A derived
 * boundary that happens to occur inside a file is re-derived by rehashing
 * until it collides with nothing.
 */

export interface UploadFile {
  name: string;
  data: Uint8Array;
}

export interface MultipartBody {
  body: Uint8Array;
  contentType: string;
}

const encoder = new TextEncoder();

function hex(buffer: ArrayBuffer): string {
  return [...new Uint8Array(buffer)]
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

async function sha256Hex(data: Uint8Array): Promise<string> {
  // copy into a plain ArrayBuffer; the source may be a SharedArrayBuffer view
  const plain = new Uint8Array(data.length);
  plain.set(data);
  return hex(await crypto.subtle.digest("SHA-256", plain.buffer));
}

function concatBytes(chunks: Uint8Array[]): Uint8Array {
  const total = chunks.reduce((n, c) => n + c.length, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const chunk of chunks) {
    out.set(chunk, offset);
    offset += chunk.length;
  }
  return out;
}

function contains(haystack: Uint8Array, needle: Uint8Array): boolean {
  outer: for (let i = 0; i + needle.length <= haystack.length; i++) {
    for (let j = 0; j < needle.length; j++) {
      if (haystack[i + j] !== needle[j]) continue outer;
    }
    return true;
  }
  return false;
}

/** Header-safe filename: double quotes and line breaks cannot survive. */
function sanitizeFilename(name: string): string {
  return name.replace(/"/g, "%22").replace(/[\r\n]/g, "");
}

export async function buildMultipart(
  files: UploadFile[],
): Promise<MultipartBody> {
  if (files.length === 0) throw new Error("no files to upload");
  const parts = await Promise.all(files.map(async (f) => ({
    filename: sanitizeFilename(f.name),
    data: f.data,
    digest: await sha256Hex(f.data),
  })));
  parts.sort((a, b) => {
    if (a.filename !== b.filename) return a.filename < b.filename ? -1 : 1;
    if (a.digest !== b.digest) return a.digest < b.digest ? -1 : 1;
    return 0;
  });

  const zero = new Uint8Array([0]);
  let seed = await sha256Hex(concatBytes(parts.flatMap(
    (p) => [encoder.encode(p.filename), zero, p.data, zero])));
  let boundary = `----upload-${seed.slice(0, 24)}`;
  const collides = (b: string) => {
    const needle = encoder.encode(b);
    return parts.some((p) =>
      contains(p.data, needle) || contains(encoder.encode(p.filename), needle));
  };
  while (collides(boundary)) {
    seed = await sha256Hex(encoder.encode(seed));
    boundary = `----upload-${seed.slice(0, 24)}`;
  }

  const chunks: Uint8Array[] = [];
  for (const part of parts) {
    chunks.push(encoder.encode(
      `--${boundary}\r\n` +
      `Content-Disposition: form-data; name="file";` +
      ` filename="${part.filename}"\r\n` +
      `Content-Type: application/octet-stream\r\n\r\n`));
    chunks.push(part.data);
    chunks.push(encoder.encode("\r\n"));
  }
  chunks.push(encoder.encode(`--${boundary}--\r\n`));
  return {
    body: concatBytes(chunks),
    contentType: `multipart/form-data; boundary=${boundary}`,
  };
}

/** Files from a drop event, in a stable shape for buildMultipart. */
export async function filesFromDataTransfer(
  transfer: DataTransfer,
): Promise<UploadFile[]> {
  const out: UploadFile[] = [];
  for (const file of Array.from(transfer.files)) {
    out.push({ name: file.name, data: new Uint8Array(await file.arrayBuffer()) });
  }
  return out;
}

/** Files from an <input type="file"> change event. */
export async function filesFromInput(
  input: HTMLInputElement,
): Promise<UploadFile[]> {
  const out: UploadFile[] = [];
  for (const file of Array.from(input.files ?? [])) {
    out.push({ name: file.name, data: new Uint8Array(await file.arrayBuffer()) });
  }
  return out;
}

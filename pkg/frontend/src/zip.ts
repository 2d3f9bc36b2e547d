// Minimal reader for the service's STORED (uncompressed) ZIP archives.
// The gallery arrives as one multi-seed archive; unpacking the container
// here keeps a single /generate round trip per refresh without computing
// any pixels client-side.

const LOCAL_HEADER = 0x04034b50;
const CENTRAL_HEADER = 0x02014b50;

export interface ZipEntry {
  name: string;
  data: Uint8Array;
}

export function readStoredZip(bytes: Uint8Array): ZipEntry[] {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const entries: ZipEntry[] = [];
  let offset = 0;
  while (offset + 4 <= bytes.length) {
    const signature = view.getUint32(offset, true);
    if (signature === CENTRAL_HEADER) break;
    if (signature !== LOCAL_HEADER) throw new Error("not a zip archive");
    const method = view.getUint16(offset + 8, true);
    const compressedSize = view.getUint32(offset + 18, true);
    const nameLength = view.getUint16(offset + 26, true);
    const extraLength = view.getUint16(offset + 28, true);
    if (method !== 0) throw new Error("archive entries must be stored uncompressed");
    const nameStart = offset + 30;
    const name = new TextDecoder().decode(bytes.subarray(nameStart, nameStart + nameLength));
    const dataStart = nameStart + nameLength + extraLength;
    entries.push({ name, data: bytes.subarray(dataStart, dataStart + compressedSize) });
    offset = dataStart + compressedSize;
  }
  return entries;
}

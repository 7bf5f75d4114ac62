/** Pixel math for mask overlays and result diffs.
 *
 * Masks arrive as 1-bit PNGs; the browser decodes them to RGBA where a set
 * bit is white. The overlay blends a fixed highlight color over masked
 * pixels at a constant alpha so every mask reads the same way visually.
 * Legend chip colors are derived from a stable hash of the label text, so
 * a given label keeps its color across sessions and reloads without any
 * hardcoded palette.
 */

export const MASK_ALPHA = 0.45;
export const MASK_COLOR: readonly [number, number, number] = [255, 64, 160];
export const DIFF_COLOR: readonly [number, number, number] = [64, 200, 255];

/** FNV-1a over UTF-16 code units; cheap, stable, well distributed. */
export function stableHash(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i += 1) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/** Deterministic legend color for a label name (CSS hsl string). */
export function labelColor(label: string): string {
  const hash = stableHash(label);
  const hue = hash % 360;
  const saturation = 55 + (Math.floor(hash / 360) % 30);
  return `hsl(${hue}, ${saturation}%, 52%)`;
}

function assertSameSize(a: Uint8ClampedArray, b: Uint8ClampedArray): void {
  if (a.length !== b.length) {
    throw new Error(`pixel buffers differ in size: ${a.length} vs ${b.length}`);
  }
}

/** True where the decoded mask pixel is set (white in the 1-bit PNG). */
function maskBit(mask: Uint8ClampedArray, offset: number): boolean {
  const value = mask[offset];
  return value !== undefined && value > 127;
}

/**
 * Blend the fixed highlight color over `base` wherever `mask` is set.
 * Both buffers are RGBA; returns a new buffer, inputs are untouched.
 */
export function compositeMask(
  base: Uint8ClampedArray,
  mask: Uint8ClampedArray,
  color: readonly [number, number, number] = MASK_COLOR,
  alpha: number = MASK_ALPHA,
): Uint8ClampedArray {
  assertSameSize(base, mask);
  const out = new Uint8ClampedArray(base);
  const keep = 1 - alpha;
  for (let i = 0; i < out.length; i += 4) {
    if (!maskBit(mask, i)) continue;
    out[i] = Math.round((base[i] ?? 0) * keep + color[0] * alpha);
    out[i + 1] = Math.round((base[i + 1] ?? 0) * keep + color[1] * alpha);
    out[i + 2] = Math.round((base[i + 2] ?? 0) * keep + color[2] * alpha);
    out[i + 3] = 255;
  }
  return out;
}

/**
 * Highlight pixels that changed between two renders of the same image.
 * Unchanged pixels are dimmed so the edit region pops.
 */
export function diffHighlight(
  before: Uint8ClampedArray,
  after: Uint8ClampedArray,
  color: readonly [number, number, number] = DIFF_COLOR,
  alpha: number = MASK_ALPHA,
): Uint8ClampedArray {
  assertSameSize(before, after);
  const out = new Uint8ClampedArray(after);
  const keep = 1 - alpha;
  for (let i = 0; i < out.length; i += 4) {
    const changed =
      before[i] !== after[i] || before[i + 1] !== after[i + 1] || before[i + 2] !== after[i + 2];
    if (changed) {
      out[i] = Math.round((after[i] ?? 0) * keep + color[0] * alpha);
      out[i + 1] = Math.round((after[i + 1] ?? 0) * keep + color[1] * alpha);
      out[i + 2] = Math.round((after[i + 2] ?? 0) * keep + color[2] * alpha);
    } else {
      out[i] = Math.round((after[i] ?? 0) * 0.55);
      out[i + 1] = Math.round((after[i + 1] ?? 0) * 0.55);
      out[i + 2] = Math.round((after[i + 2] ?? 0) * 0.55);
    }
    out[i + 3] = 255;
  }
  return out;
}

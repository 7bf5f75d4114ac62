import { describe, expect, it } from "vitest";
import {
  DIFF_COLOR,
  MASK_ALPHA,
  MASK_COLOR,
  compositeMask,
  diffHighlight,
  labelColor,
  stableHash,
} from "../src/overlay";

function rgba(...pixels: number[][]): Uint8ClampedArray {
  return new Uint8ClampedArray(pixels.flat());
}

describe("legend colors", () => {
  it("hashes deterministically", () => {
    expect(stableHash("")).toBe(0x811c9dc5);
    expect(stableHash("necklace")).toBe(stableHash("necklace"));
    expect(labelColor("top")).toBe(labelColor("top"));
  });

  it("assigns distinct colors to distinct labels", () => {
    const labels = ["top", "pants", "necklace", "hair", "left-lower-arm"];
    const colors = new Set(labels.map(labelColor));
    expect(colors.size).toBe(labels.length);
  });

  it("emits a valid hsl() string", () => {
    expect(labelColor("wrist")).toMatch(/^hsl\(\d{1,3}, \d{1,3}%, 52%\)$/);
  });
});

describe("mask compositing", () => {
  it("blends the fixed highlight color at 45% over masked pixels only", () => {
    expect(MASK_ALPHA).toBe(0.45);
    const base = rgba([10, 20, 30, 255], [200, 100, 50, 255]);
    const mask = rgba([255, 255, 255, 255], [0, 0, 0, 255]);
    const out = compositeMask(base, mask);

    // masked pixel: round(base * 0.55 + color * 0.45), channel by channel
    expect(Array.from(out.slice(0, 4))).toEqual([
      Math.round(10 * 0.55 + MASK_COLOR[0] * 0.45),
      Math.round(20 * 0.55 + MASK_COLOR[1] * 0.45),
      Math.round(30 * 0.55 + MASK_COLOR[2] * 0.45),
      255,
    ]);
    // unmasked pixel: untouched
    expect(Array.from(out.slice(4, 8))).toEqual([200, 100, 50, 255]);
  });

  it("treats any decoded value above 127 as a set mask bit", () => {
    const base = rgba([0, 0, 0, 255], [0, 0, 0, 255]);
    const mask = rgba([128, 128, 128, 255], [127, 127, 127, 255]);
    const out = compositeMask(base, mask);
    expect(out[0]).toBe(Math.round(MASK_COLOR[0] * 0.45));
    expect(out[4]).toBe(0);
  });

  it("does not mutate its inputs and rejects mismatched sizes", () => {
    const base = rgba([9, 9, 9, 255]);
    const mask = rgba([255, 255, 255, 255]);
    const baseCopy = Array.from(base);
    const maskCopy = Array.from(mask);
    compositeMask(base, mask);
    expect(Array.from(base)).toEqual(baseCopy);
    expect(Array.from(mask)).toEqual(maskCopy);
    expect(() => compositeMask(base, rgba([0, 0, 0, 255], [0, 0, 0, 255]))).toThrow(/size/);
  });
});

describe("diff highlighting", () => {
  it("tints changed pixels and dims unchanged ones", () => {
    const before = rgba([10, 20, 30, 255], [0, 0, 0, 255]);
    const after = rgba([10, 20, 30, 255], [100, 100, 100, 255]);
    const out = diffHighlight(before, after);

    // unchanged: dimmed to 55%
    expect(Array.from(out.slice(0, 4))).toEqual([
      Math.round(10 * 0.55),
      Math.round(20 * 0.55),
      Math.round(30 * 0.55),
      255,
    ]);
    // changed: blended toward the diff color
    expect(Array.from(out.slice(4, 8))).toEqual([
      Math.round(100 * 0.55 + DIFF_COLOR[0] * 0.45),
      Math.round(100 * 0.55 + DIFF_COLOR[1] * 0.45),
      Math.round(100 * 0.55 + DIFF_COLOR[2] * 0.45),
      255,
    ]);
  });

  it("counts an alpha-only difference as unchanged", () => {
    const before = rgba([50, 60, 70, 200]);
    const after = rgba([50, 60, 70, 255]);
    const out = diffHighlight(before, after);
    expect(Array.from(out)).toEqual([
      Math.round(50 * 0.55),
      Math.round(60 * 0.55),
      Math.round(70 * 0.55),
      255,
    ]);
  });
});

import { describe, expect, it } from "vitest";

import { selfIntersects, validateSketch, type Point } from "../src/geometry.js";

const square: Point[] = [[0, 0], [4, 0], [4, 4], [0, 4]];
const bowtie: Point[] = [[0, 0], [4, 4], [4, 0], [0, 4]]; // edges cross in the middle

describe("selfIntersects", () => {
  it("accepts simple rings", () => {
    expect(selfIntersects(square)).toBe(false);
    expect(selfIntersects([[0, 0], [3, 1], [1, 4]])).toBe(false);
  });

  it("rejects the bowtie", () => {
    expect(selfIntersects(bowtie)).toBe(true);
  });

  it("rejects rings whose closing edge crosses another", () => {
    const hook: Point[] = [[0, 0], [6, 0], [6, 4], [3, -2], [0, 4]];
    expect(selfIntersects(hook)).toBe(true);
  });
});

describe("validateSketch", () => {
  it("needs at least three vertices", () => {
    expect(validateSketch([[0, 0], [1, 1]]).ok).toBe(false);
  });

  it("passes a simple polygon", () => {
    expect(validateSketch(square)).toEqual({ ok: true, message: "" });
  });

  it("explains a self-intersection", () => {
    const check = validateSketch(bowtie);
    expect(check.ok).toBe(false);
    expect(check.message).toMatch(/crosses itself/);
  });
});

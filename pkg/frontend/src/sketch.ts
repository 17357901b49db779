// Polygon sketching on the site view: collect vertices, validate, hand off raw
// geographic coordinates (simplification is the server's business).

import { validateSketch, type Point } from "./geometry.js";

export class PolygonSketch {
  private vertices: Point[] = [];

  add(p: Point): void {
    this.vertices.push(p);
  }

  clear(): void {
    this.vertices = [];
  }

  get count(): number {
    return this.vertices.length;
  }

  points(): Point[] {
    return [...this.vertices];
  }

  /** Closed-ring vertices if valid, otherwise an error message. */
  finish(): { polygon: Point[] | null; error: string } {
    if (this.vertices.length === 0) return { polygon: null, error: "" };
    const check = validateSketch(this.vertices);
    if (!check.ok) return { polygon: null, error: check.message };
    return { polygon: this.points(), error: "" };
  }
}

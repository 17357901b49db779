// Client-side sketch validation: sketched boundaries must be simple polygons.

export type Point = [number, number];

function orient(a: Point, b: Point, c: Point): number {
  return Math.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

function onSegment(a: Point, b: Point, p: Point): boolean {
  return (
    Math.min(a[0], b[0]) <= p[0] && p[0] <= Math.max(a[0], b[0]) &&
    Math.min(a[1], b[1]) <= p[1] && p[1] <= Math.max(a[1], b[1])
  );
}

export function segmentsIntersect(a: Point, b: Point, c: Point, d: Point): boolean {
  const o1 = orient(a, b, c);
  const o2 = orient(a, b, d);
  const o3 = orient(c, d, a);
  const o4 = orient(c, d, b);
  if (o1 !== o2 && o3 !== o4) return true;
  if (o1 === 0 && onSegment(a, b, c)) return true;
  if (o2 === 0 && onSegment(a, b, d)) return true;
  if (o3 === 0 && onSegment(c, d, a)) return true;
  if (o4 === 0 && onSegment(c, d, b)) return true;
  return false;
}

/** True when the closed ring crosses itself (adjacent edges sharing a vertex are fine). */
export function selfIntersects(ring: Point[]): boolean {
  const n = ring.length;
  if (n < 4) return false; // a triangle cannot self-intersect
  const edge = (i: number): [Point, Point] => [ring[i], ring[(i + 1) % n]];
  for (let i = 0; i < n; i++) {
    for (let j = i + 1; j < n; j++) {
      const adjacent = j === i + 1 || (i === 0 && j === n - 1);
      if (adjacent) continue;
      const [a, b] = edge(i);
      const [c, d] = edge(j);
      if (segmentsIntersect(a, b, c, d)) return true;
    }
  }
  return false;
}

export interface SketchValidation {
  ok: boolean;
  message: string;
}

export function validateSketch(ring: Point[]): SketchValidation {
  if (ring.length < 3) return { ok: false, message: "need at least 3 vertices" };
  if (selfIntersects(ring)) return { ok: false, message: "polygon crosses itself; redraw" };
  return { ok: true, message: "" };
}

/**
 * Colormaps for field rendering: a diverging blue-white-red map for
 * signed fields and a compact sequential map for magnitudes.
 */

export type Rgb = [number, number, number];

const clamp01 = (x: number) => Math.min(1, Math.max(0, x));

/** Diverging map: -1 -> blue, 0 -> white, +1 -> red. */
export function diverging(x: number): Rgb {
  const t = clamp01((x + 1) / 2);
  if (t < 0.5) {
    const s = t / 0.5;
    return [Math.round(33 + s * (255 - 33)),
            Math.round(102 + s * (255 - 102)),
            Math.round(172 + s * (255 - 172))];
  }
  const s = (t - 0.5) / 0.5;
  return [Math.round(255 - s * (255 - 178)),
          Math.round(255 - s * (255 - 24)),
          Math.round(255 - s * (255 - 43))];
}

/** Sequential map (dark violet -> teal -> yellow), viridis-like. */
export function sequential(x: number): Rgb {
  const t = clamp01(x);
  const stops: Rgb[] = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
  ];
  const pos = t * (stops.length - 1);
  const i = Math.min(stops.length - 2, Math.floor(pos));
  const s = pos - i;
  return [0, 1, 2].map((c) =>
    Math.round(stops[i][c] + s * (stops[i + 1][c] - stops[i][c]))) as Rgb;
}

export function css(rgb: Rgb): string {
  return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
}

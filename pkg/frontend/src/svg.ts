/**
 * Deterministic SVG assembly: fixed precision, no timestamps, metadata
 * block carrying the source manifest hash.
 */

export interface Extent {
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

export function fmt(x: number, digits = 6): string {
  if (!Number.isFinite(x)) return 'nan';
  return x.toPrecision(digits).replace(/\.?0+e/, 'e').replace(/\.?0+$/, '');
}

export class Scale {
  constructor(
    readonly d0: number,
    readonly d1: number,
    readonly r0: number,
    readonly r1: number,
  ) {}

  map(x: number): number {
    return this.r0 + ((x - this.d0) / (this.d1 - this.d0)) * (this.r1 - this.r0);
  }

  ticks(n = 5): number[] {
    const span = this.d1 - this.d0;
    const step = Math.pow(10, Math.floor(Math.log10(span / n)));
    const candidates = [step, 2 * step, 5 * step, 10 * step];
    const s = candidates.find((c) => span / c <= n + 1) ?? 10 * step;
    const out: number[] = [];
    for (let t = Math.ceil(this.d0 / s) * s; t <= this.d1 + 1e-12 * span; t += s) {
      out.push(Math.abs(t) < 1e-12 * span ? 0 : t);
    }
    return out;
  }
}

export class SvgDoc {
  private parts: string[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
    manifestHash: string,
  ) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}">`,
      `<metadata id="source-manifest">${manifestHash}</metadata>`,
      `<rect x="0" y="0" width="${width}" height="${height}" fill="white"/>`,
    );
  }

  raw(s: string): void {
    this.parts.push(s);
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" ` +
      `height="${fmt(h)}" fill="${fill}"/>`,
    );
  }

  circle(cx: number, cy: number, r: number, stroke: string): void {
    this.parts.push(
      `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="${fmt(r)}" fill="none" ` +
      `stroke="${stroke}" stroke-width="0.8"/>`,
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, width = 1.2,
           dash = ''): void {
    const d = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ');
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : '';
    this.parts.push(
      `<polyline points="${d}" fill="none" stroke="${stroke}" ` +
      `stroke-width="${width}"${dashAttr}/>`,
    );
  }

  text(x: number, y: number, s: string, size = 11, anchor = 'start',
       cls = ''): void {
    const classAttr = cls ? ` class="${cls}"` : '';
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" ` +
      `font-family="sans-serif" text-anchor="${anchor}"${classAttr}>` +
      `${escapeXml(s)}</text>`,
    );
  }

  axes(ext: Extent, xs: Scale, ys: Scale, xlabel: string, ylabel: string): void {
    const { x0, x1, y0, y1 } = ext;
    this.parts.push(
      `<rect x="${fmt(x0)}" y="${fmt(y0)}" width="${fmt(x1 - x0)}" ` +
      `height="${fmt(y1 - y0)}" fill="none" stroke="black" stroke-width="1"/>`,
    );
    for (const t of xs.ticks()) {
      const px = xs.map(t);
      this.polyline([[px, y1], [px, y1 + 4]], 'black', 0.8);
      this.text(px, y1 + 15, fmt(t, 3), 9, 'middle');
    }
    for (const t of ys.ticks()) {
      const py = ys.map(t);
      this.polyline([[x0 - 4, py], [x0, py]], 'black', 0.8);
      this.text(x0 - 6, py + 3, fmt(t, 3), 9, 'end');
    }
    this.text((x0 + x1) / 2, y1 + 30, xlabel, 11, 'middle');
    this.text(x0 - 46, (y0 + y1) / 2, ylabel, 11, 'middle');
  }

  render(): string {
    return this.parts.join('\n') + '\n</svg>\n';
  }
}

function escapeXml(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

/**
 * The five figure kinds rendered from solver outputs.
 *
 * The plotting layer never computes physics: every numeric annotation is
 * copied verbatim from the CSV/JSON inputs and exposed on the SVG node as
 * a data-value attribute so the round-trip can be checked mechanically.
 * Each figure embeds the source manifest hash in its metadata block and
 * caption.
 */

import { basename } from 'path';
import { column, readCsv, readJson, Table } from './csv.js';
import { css, diverging } from './colormap.js';
import { fmt, Scale, SvgDoc } from './svg.js';

export type FigureKind =
  | 'mode_map'
  | 'field_map'
  | 'line_cut'
  | 'envelope_curve'
  | 'comparison';

export interface FigureSpec {
  kind: FigureKind;
  inputs: string[];
  output: string;
  title?: string;
}

const FIELD_COLUMNS = ['x', 'y', 're_u', 'im_u', 'inside'];
const LINE_COLUMNS = ['x', 're_u', 'im_u', 'inside'];
const ENVELOPE_COLUMNS = ['epsilon', 'f_dispersion', 'f_fft'];

function pick(inputs: string[], suffix: string): string {
  const hit = inputs.find((p) => p.endsWith(suffix));
  if (!hit) throw new Error(`figure needs an input ending in ${suffix}`);
  return hit;
}

function manifestHash(inputs: string[]): string {
  const manifest = readJson(pick(inputs, 'manifest.json'));
  return manifest.config_sha256;
}

function annotation(doc: SvgDoc, x: number, y: number, label: string,
                    key: string, value: number | string): void {
  doc.raw(
    `<text x="${fmt(x)}" y="${fmt(y)}" font-size="10" ` +
    `font-family="monospace" class="annotation" data-key="${key}" ` +
    `data-value="${value}">${label} = ${value}</text>`,
  );
}

interface Grid {
  xs: number[];
  ys: number[];
  values: number[][]; // [iy][ix]
}

function toGrid(table: Table, field: string): Grid {
  const x = column(table, 'x');
  const y = column(table, 'y');
  const v = column(table, field);
  const xs = [...new Set(x)].sort((a, b) => a - b);
  const ys = [...new Set(y)].sort((a, b) => a - b);
  const ix = new Map(xs.map((val, i) => [val, i]));
  const iy = new Map(ys.map((val, i) => [val, i]));
  const values = ys.map(() => xs.map(() => NaN));
  for (let r = 0; r < x.length; r++) {
    values[iy.get(y[r])!][ix.get(x[r])!] = v[r];
  }
  return { xs, ys, values };
}

function heatPanel(doc: SvgDoc, grid: Grid, px0: number, py0: number,
                   pw: number, ph: number, vmax: number, label: string): void {
  const nx = grid.xs.length;
  const ny = grid.ys.length;
  const cw = pw / nx;
  const ch = ph / ny;
  for (let iy = 0; iy < ny; iy++) {
    for (let ix = 0; ix < nx; ix++) {
      const v = grid.values[iy][ix];
      const color = Number.isFinite(v) ? css(diverging(v / vmax)) : 'gray';
      // image convention: y increases upward
      doc.rect(px0 + ix * cw, py0 + ph - (iy + 1) * ch, cw + 0.3, ch + 0.3,
               color);
    }
  }
  doc.raw(
    `<rect x="${fmt(px0)}" y="${fmt(py0)}" width="${fmt(pw)}" ` +
    `height="${fmt(ph)}" fill="none" stroke="black" stroke-width="1"/>`,
  );
  doc.text(px0 + pw / 2, py0 - 6, label, 11, 'middle');
}

export function renderModeMap(spec: FigureSpec): string {
  const table = readCsv(pick(spec.inputs, 'field.csv'), FIELD_COLUMNS);
  const report = readJson(pick(spec.inputs, 'field.json'));
  const hash = manifestHash(spec.inputs);
  const re = toGrid(table, 're_u');
  const im = toGrid(table, 'im_u');
  const vmax = Math.max(
    ...table.rows.map((r) => Math.max(Math.abs(r[2]), Math.abs(r[3]))));
  const doc = new SvgDoc(820, 460, hash);
  doc.text(410, 20, spec.title ?? 'Cell-scale mode, real and imaginary parts',
           13, 'middle');
  heatPanel(doc, re, 40, 50, 360, 330, vmax, 'Re u');
  heatPanel(doc, im, 430, 50, 360, 330, vmax, 'Im u');
  annotation(doc, 40, 412, 'omega', 'omega', report.omega);
  annotation(doc, 40, 426, 'epsilon', 'epsilon', report.epsilon);
  doc.text(40, 446, `source manifest ${hash}`, 9);
  return doc.render();
}

export function renderFieldMap(spec: FigureSpec): string {
  const table = readCsv(pick(spec.inputs, 'field.csv'), FIELD_COLUMNS);
  const report = readJson(pick(spec.inputs, 'field.json'));
  const hash = manifestHash(spec.inputs);
  const re = toGrid(table, 're_u');
  const vmax = Math.max(...table.rows.map((r) => Math.abs(r[2])));
  const doc = new SvgDoc(820, 520, hash);
  doc.text(410, 20, spec.title ?? 'Re u over many unit cells', 13, 'middle');
  heatPanel(doc, re, 60, 40, 700, 400, vmax, '');
  annotation(doc, 60, 470, 'omega', 'omega', report.omega);
  annotation(doc, 60, 484, 'band', 'band', report.band);
  doc.text(60, 506, `source manifest ${hash}`, 9);
  return doc.render();
}

export function renderLineCut(spec: FigureSpec): string {
  const table = readCsv(pick(spec.inputs, 'field_line.csv'), LINE_COLUMNS);
  const hash = manifestHash(spec.inputs);
  const x = column(table, 'x');
  const re = column(table, 're_u');
  const doc = new SvgDoc(820, 360, hash);
  doc.text(410, 20, spec.title ?? 'Re u along the x-axis', 13, 'middle');
  const ext = { x0: 60, x1: 780, y0: 40, y1: 290 };
  const ymax = Math.max(...re.map(Math.abs));
  const xs = new Scale(Math.min(...x), Math.max(...x), ext.x0, ext.x1);
  const ys = new Scale(-1.05 * ymax, 1.05 * ymax, ext.y1, ext.y0);
  doc.axes(ext, xs, ys, 'x', 'Re u');
  doc.polyline([[ext.x0, ys.map(0)], [ext.x1, ys.map(0)]], '#bbbbbb', 0.6);
  doc.polyline(x.map((xv, i) => [xs.map(xv), ys.map(re[i])]), '#1f77b4');
  doc.text(60, 346, `source manifest ${hash}`, 9);
  return doc.render();
}

function envelopePanel(doc: SvgDoc, table: Table, report: any,
                       ext: { x0: number; x1: number; y0: number; y1: number },
                       title: string): void {
  const eps = column(table, 'epsilon');
  const f = column(table, 'f_dispersion');
  const good = eps.map((_, i) => Number.isFinite(f[i]));
  const epsG = eps.filter((_, i) => good[i]);
  const fG = f.filter((_, i) => good[i]);
  const xs = new Scale(Math.min(0, ...epsG), Math.max(...epsG), ext.x0, ext.x1);
  const ys = new Scale(0, 1.1 * Math.max(...fG), ext.y1, ext.y0);
  doc.axes(ext, xs, ys, 'epsilon', 'f');
  // fitted overlay from the report (linear in |eps| or a sqrt law)
  const n = 60;
  const overlay: Array<[number, number]> = [];
  for (let i = 0; i <= n; i++) {
    const e = xs.d0 + ((xs.d1 - xs.d0) * i) / n;
    const model = report.fit_model === 'linear'
      ? report.fit_coefficient * Math.abs(e) + report.fit_intercept
      : e >= 0 ? report.fit_coefficient * Math.sqrt(e) : NaN;
    if (Number.isFinite(model) && model <= ys.d1 && model >= 0) {
      overlay.push([xs.map(e), ys.map(model)]);
    }
  }
  doc.polyline(overlay, '#d62728', 1.0, '4 3');
  for (let i = 0; i < epsG.length; i++) {
    doc.circle(xs.map(epsG[i]), ys.map(fG[i]), 2.6, '#1f77b4');
  }
  doc.text((ext.x0 + ext.x1) / 2, ext.y0 - 8, title, 11, 'middle');
}

export function renderEnvelopeCurve(spec: FigureSpec): string {
  const table = readCsv(pick(spec.inputs, 'envelope.csv'), ENVELOPE_COLUMNS);
  const report = readJson(pick(spec.inputs, 'envelope.json'));
  const hash = manifestHash(spec.inputs);
  const doc = new SvgDoc(640, 480, hash);
  const kind = report.lattice_kind;
  doc.text(320, 20, spec.title ??
           `Envelope spatial frequency (${kind} lattice)`, 13, 'middle');
  envelopePanel(doc, table, report, { x0: 80, x1: 600, y0: 50, y1: 380 },
                report.fit_model === 'linear'
                  ? 'linear law f ~ |epsilon|'
                  : 'square-root law f ~ sqrt(epsilon)');
  annotation(doc, 80, 412, 'fit_model', 'fit_model', report.fit_model);
  annotation(doc, 80, 426, 'fit_coefficient', 'fit_coefficient',
             report.fit_coefficient);
  annotation(doc, 80, 440, 'fit_r2', 'fit_r2', report.fit_r2);
  annotation(doc, 330, 426, 'omega_star', 'omega_star', report.omega_star);
  if (report.slope_formula !== null && report.slope_formula !== undefined) {
    annotation(doc, 330, 440, 'slope_formula', 'slope_formula',
               report.slope_formula);
  }
  doc.text(80, 466, `source manifest ${hash}`, 9);
  return doc.render();
}

export function renderComparison(spec: FigureSpec): string {
  const compare = readJson(pick(spec.inputs, 'compare.json'));
  const hc = readCsv(pick(spec.inputs, 'envelope_honeycomb.csv'),
                     ENVELOPE_COLUMNS);
  const sq = readCsv(pick(spec.inputs, 'envelope_square.csv'), ENVELOPE_COLUMNS);
  const hash = manifestHash(spec.inputs);
  const doc = new SvgDoc(900, 520, hash);
  doc.text(450, 20, spec.title ??
           'Envelope laws: honeycomb (near-zero index) vs square', 13, 'middle');
  envelopePanel(doc, hc, compare.honeycomb,
                { x0: 70, x1: 430, y0: 60, y1: 390 }, 'honeycomb: f ~ |epsilon|');
  envelopePanel(doc, sq, compare.square,
                { x0: 520, x1: 880, y0: 60, y1: 390 },
                'square: f ~ sqrt(epsilon)');
  const me = compare.mutual_exclusion;
  annotation(doc, 70, 432, 'honeycomb_linear_spread', 'honeycomb_linear_spread',
             me.honeycomb_linear_spread);
  annotation(doc, 70, 446, 'square_sqrt_spread', 'square_sqrt_spread',
             me.square_sqrt_spread);
  annotation(doc, 70, 460, 'exclusive', 'exclusive', me.exclusive);
  doc.text(70, 492, `source manifest ${hash}`, 9);
  return doc.render();
}

export function render(spec: FigureSpec): string {
  switch (spec.kind) {
    case 'mode_map':
      return renderModeMap(spec);
    case 'field_map':
      return renderFieldMap(spec);
    case 'line_cut':
      return renderLineCut(spec);
    case 'envelope_curve':
      return renderEnvelopeCurve(spec);
    case 'comparison':
      return renderComparison(spec);
    default:
      throw new Error(`unknown figure kind ${(spec as FigureSpec).kind}`);
  }
}

/**
 * Hand-rolled SVG chart builder: line/marker series on a linear or log-10
 * y axis, optional confidence bands, legend.  No dependencies, no
 * timestamps — rendering the same data twice gives identical bytes.
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
  line?: boolean;
  markers?: boolean;
  dash?: string;                        // stroke-dasharray
  band?: { lo: number[]; hi: number[] }; // confidence band around y
  /** "pred" series are drawn as plain lines over the "sim" markers and
   *  are not counted as data series. */
  role?: "sim" | "pred";
}

export interface ChartOpts {
  title: string;
  xLabel: string;
  yLabel: string;
  logY: boolean;
  series: Series[];
  /** Clip for non-positive values on a log axis (e.g. 1/(trials*N)). */
  floor?: number;
}

export interface ChartSummary {
  seriesCount: number;   // "sim" series only
  predCount: number;
  pointsPerSeries: number[];
  logY: boolean;
  clipped: number;       // values raised to the floor for the log axis
}

export const PALETTE = [
  "#4361ee", "#e63946", "#2d6a4f", "#f77f00", "#9d4edd", "#457b9d",
];

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function niceTicks(min: number, max: number, count: number): number[] {
  const range = max - min || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const nice = [1, 2, 5, 10].map((m) => m * mag);
  const step = nice.find((n) => n >= rough) ?? rough;
  const start = Math.ceil(min / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= max + step * 0.01; v += step) ticks.push(v);
  return ticks;
}

function fmtTick(v: number): string {
  if (v !== 0 && (Math.abs(v) < 1e-3 || Math.abs(v) >= 1e4)) {
    return v.toExponential(0).replace("e-", "e-").replace("e+", "e");
  }
  return v % 1 === 0 ? String(v) : String(parseFloat(v.toPrecision(3)));
}

export function buildChart(opts: ChartOpts): { svg: string; summary: ChartSummary } {
  const { series, logY } = opts;
  const sim = series.filter((s) => (s.role ?? "sim") === "sim");
  const pred = series.filter((s) => s.role === "pred");

  // Clip non-positive values so every point lands on the log axis.
  let clipped = 0;
  const allY: number[] = [];
  const yOfSeries = series.map((s) => {
    const ys = [s.y, s.band?.lo ?? [], s.band?.hi ?? []];
    return ys;
  });
  const positives = yOfSeries.flat(2).filter((v) => v > 0 && isFinite(v));
  let floor = opts.floor ?? 0;
  if (logY) {
    if (floor <= 0) {
      if (positives.length === 0) {
        throw new Error(`${opts.title}: no positive values for a log axis`);
      }
      floor = Math.min(...positives);
    }
  }
  const clip = (v: number): number => {
    if (!logY) return v;
    if (!(v > floor)) {
      if (v !== floor) clipped += 1;
      return floor;
    }
    return v;
  };
  const cSeries = series.map((s) => ({
    ...s,
    y: s.y.map(clip),
    band: s.band
      ? { lo: s.band.lo.map(clip), hi: s.band.hi.map(clip) }
      : undefined,
  }));
  for (const s of cSeries) {
    allY.push(...s.y);
    if (s.band) allY.push(...s.band.lo, ...s.band.hi);
  }
  const allX = series.flatMap((s) => s.x);

  // Layout
  const W = 640, H = 400;
  const ml = 64, mr = 16, mt = 34, mb = 46;
  const pw = W - ml - mr;
  const ph = H - mt - mb;

  const xMin = Math.min(...allX), xMax = Math.max(...allX);
  const xOf = (v: number) => ml + ((v - xMin) / (xMax - xMin || 1)) * pw;

  let yOf: (v: number) => number;
  let yTicks: { v: number; text: string }[];
  if (logY) {
    const lo = Math.floor(Math.log10(Math.min(...allY)));
    const hi = Math.ceil(Math.log10(Math.max(...allY)));
    const span = Math.max(hi - lo, 1);
    yOf = (v) => mt + ph - ((Math.log10(v) - lo) / span) * ph;
    yTicks = [];
    for (let d = lo; d <= lo + span; d++) {
      yTicks.push({ v: Math.pow(10, d), text: d === 0 ? "1" : `1e${d}` });
    }
  } else {
    const rawMin = Math.min(...allY, 0);
    const rawMax = Math.max(...allY) * 1.08 || 1;
    yOf = (v) => mt + ph - ((v - rawMin) / (rawMax - rawMin || 1)) * ph;
    yTicks = niceTicks(rawMin, rawMax, 5).map((v) => ({ v, text: fmtTick(v) }));
  }

  let s = `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}" `
    + `font-family="Helvetica, Arial, sans-serif" data-log-y="${logY}">\n`;
  s += `<rect width="${W}" height="${H}" fill="#fff"/>\n`;
  s += `<text x="${ml}" y="${mt - 12}" font-size="12" font-weight="600" fill="#222">${esc(opts.title)}</text>\n`;

  // Grid
  for (const tick of yTicks) {
    const y = yOf(tick.v);
    s += `<line x1="${ml}" y1="${y.toFixed(1)}" x2="${ml + pw}" y2="${y.toFixed(1)}" stroke="#eee" stroke-width="0.6"/>\n`;
  }

  // Confidence bands first, underneath everything.
  for (const sr of cSeries) {
    if (!sr.band) continue;
    const fwd = sr.x.map((x, i) => `${xOf(x).toFixed(1)},${yOf(sr.band!.hi[i]).toFixed(1)}`);
    const back = [...sr.x.keys()].reverse().map(
      (i) => `${xOf(sr.x[i]).toFixed(1)},${yOf(sr.band!.lo[i]).toFixed(1)}`);
    s += `<polygon class="band" fill="${sr.color}" opacity="0.12" points="${fwd.join(" ")} ${back.join(" ")}"/>\n`;
  }

  // Series
  for (const sr of cSeries) {
    const role = sr.role ?? "sim";
    const cls = role === "pred" ? "pred" : "series";
    s += `<g class="${cls}" data-label="${esc(sr.label)}">\n`;
    const pts = sr.x.map((x, i) => `${xOf(x).toFixed(1)},${yOf(sr.y[i]).toFixed(1)}`);
    if (sr.line ?? true) {
      s += `<polyline class="line" fill="none" stroke="${sr.color}" stroke-width="1.4" `
        + (sr.dash ? `stroke-dasharray="${sr.dash}" ` : "")
        + `points="${pts.join(" ")}"/>\n`;
    }
    if (sr.markers) {
      for (const p of pts) {
        const [px, py] = p.split(",");
        s += `<circle class="pt" cx="${px}" cy="${py}" r="3" fill="${sr.color}" stroke="#fff" stroke-width="0.8"/>\n`;
      }
    }
    s += `</g>\n`;
  }

  // Axes frame
  s += `<line x1="${ml}" y1="${mt}" x2="${ml}" y2="${mt + ph}" stroke="#333" stroke-width="0.8"/>\n`;
  s += `<line x1="${ml}" y1="${mt + ph}" x2="${ml + pw}" y2="${mt + ph}" stroke="#333" stroke-width="0.8"/>\n`;

  // X ticks
  for (const v of niceTicks(xMin, xMax, 7)) {
    const x = xOf(v);
    s += `<line x1="${x.toFixed(1)}" y1="${mt + ph}" x2="${x.toFixed(1)}" y2="${mt + ph + 4}" stroke="#333" stroke-width="0.6"/>\n`;
    s += `<text x="${x.toFixed(1)}" y="${mt + ph + 15}" text-anchor="middle" font-size="9" fill="#555">${esc(fmtTick(v))}</text>\n`;
  }
  s += `<text x="${ml + pw / 2}" y="${H - 8}" text-anchor="middle" font-size="10" fill="#333">${esc(opts.xLabel)}</text>\n`;

  // Y ticks
  for (const tick of yTicks) {
    const y = yOf(tick.v);
    s += `<line x1="${ml - 4}" y1="${y.toFixed(1)}" x2="${ml}" y2="${y.toFixed(1)}" stroke="#333" stroke-width="0.6"/>\n`;
    s += `<text x="${ml - 7}" y="${(y + 3).toFixed(1)}" text-anchor="end" font-size="9" fill="#555">${esc(tick.text)}</text>\n`;
  }
  s += `<text x="14" y="${mt + ph / 2}" text-anchor="middle" font-size="10" fill="#333" transform="rotate(-90,14,${mt + ph / 2})">${esc(opts.yLabel)}</text>\n`;

  // Legend
  const entries = [...sim, ...pred];
  const legendW = Math.max(...entries.map((e) => e.label.length)) * 5.4 + 34;
  const legendH = entries.length * 13 + 6;
  const lx = ml + pw - legendW - 6, ly = mt + 8;
  s += `<rect x="${lx - 4}" y="${ly - 6}" width="${legendW + 8}" height="${legendH}" rx="2" fill="#fff" fill-opacity="0.85" stroke="#ddd" stroke-width="0.5"/>\n`;
  entries.forEach((e, i) => {
    const yy = ly + i * 13;
    s += `<line x1="${lx}" y1="${yy}" x2="${lx + 16}" y2="${yy}" stroke="${e.color}" stroke-width="1.4" ${e.dash ? `stroke-dasharray="${e.dash}"` : ""}/>\n`;
    if (e.markers) {
      s += `<circle cx="${lx + 8}" cy="${yy}" r="3" fill="${e.color}" stroke="#fff" stroke-width="0.8"/>\n`;
    }
    s += `<text x="${lx + 21}" y="${yy + 3}" font-size="9" fill="#444">${esc(e.label)}</text>\n`;
  });

  s += `</svg>\n`;
  return {
    svg: s,
    summary: {
      seriesCount: sim.length,
      predCount: pred.length,
      pointsPerSeries: sim.map((sr) => sr.x.length),
      logY,
      clipped,
    },
  };
}

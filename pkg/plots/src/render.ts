/**
 * PlotSpec loading and figure assembly.
 *
 * A spec is a small JSON file naming the input CSVs, the figure kind, and
 * the series filters.  Each kind maps one or more qofdm CSV schemas onto
 * the generic chart builder:
 *
 *   ser_vs_iter  se.v1      predicted SER per detector iteration, one
 *                           series per input file
 *   ser_vs_snr   agg.v1     measured SER per detector with confidence
 *                           bands; prediction columns drawn as lines over
 *                           the simulation markers
 *   mse_vs_snr   trials.v1  per-SNR mean channel-estimate MSE, one series
 *                           per input file
 *   pa_profile   pa.v1      channel gain and allocated power by subchannel
 */

import { readFileSync, writeFileSync } from "fs";
import {
  EmptySeries, SCHEMAS, SchemaMismatch, Table, colIndex, num, readTable,
} from "./csv";
import { ChartSummary, PALETTE, Series, buildChart } from "./chart";

export const KINDS = [
  "ser_vs_iter", "ser_vs_snr", "mse_vs_snr", "pa_profile",
] as const;
export type Kind = (typeof KINDS)[number];

export interface PlotInput {
  path: string;
  label?: string;   // series label prefix, e.g. "2-bit"
}

export interface PlotSpec {
  kind: Kind;
  inputs: PlotInput[];
  detectors?: string[];  // keep only these detector rows (agg/trials kinds)
  logY?: boolean;        // default: log for SER/MSE kinds, linear for pa
  floor?: number;        // log-axis clip, typically 1/(trials*N) of the run
  title?: string;
  out?: string;          // output SVG path; --out on the CLI overrides
}

/** Load and validate a spec file.  Throws plain Error on malformed specs. */
export function loadSpec(path: string): PlotSpec {
  let raw: unknown;
  try {
    raw = JSON.parse(readFileSync(path, "utf-8"));
  } catch (e) {
    throw new Error(`${path}: ${(e as Error).message}`);
  }
  const spec = raw as PlotSpec;
  if (!KINDS.includes(spec.kind)) {
    throw new Error(`${path}: kind must be one of ${KINDS.join(", ")}`);
  }
  if (!Array.isArray(spec.inputs) || spec.inputs.length === 0) {
    throw new Error(`${path}: inputs must be a non-empty array`);
  }
  for (const inp of spec.inputs) {
    if (typeof inp.path !== "string") {
      throw new Error(`${path}: every input needs a path`);
    }
  }
  return spec;
}

function sortedUnique(values: string[]): string[] {
  return [...new Set(values)].sort((a, b) => parseFloat(a) - parseFloat(b));
}

function label(inp: PlotInput, rest?: string): string {
  if (inp.label && rest) return `${inp.label} ${rest}`;
  return inp.label ?? rest ?? inp.path;
}

/** Detector names present in a table, in first-appearance order. */
function detectorsIn(table: Table): string[] {
  const i = colIndex(table, "detector");
  return [...new Set(table.rows.map((r) => r[i]))];
}

function serVsSnr(spec: PlotSpec): Series[] {
  const series: Series[] = [];
  let color = 0;
  for (const inp of spec.inputs) {
    const t = readTable(inp.path, SCHEMAS.agg);
    const iSnr = colIndex(t, "snr_db");
    const iDet = colIndex(t, "detector");
    const iSer = colIndex(t, "mean_ser");
    const iLo = colIndex(t, "ci_lo");
    const iHi = colIndex(t, "ci_hi");
    const iPred = colIndex(t, "se_pred_ser");
    for (const det of spec.detectors ?? detectorsIn(t)) {
      const rows = t.rows
        .filter((r) => r[iDet] === det)
        .sort((a, b) => num(a, iSnr) - num(b, iSnr));
      if (rows.length === 0) {
        throw new EmptySeries(`${inp.path}: no rows for detector "${det}"`);
      }
      const c = PALETTE[color++ % PALETTE.length];
      series.push({
        label: label(inp, det),
        x: rows.map((r) => num(r, iSnr)),
        y: rows.map((r) => num(r, iSer)),
        band: {
          lo: rows.map((r) => num(r, iLo)),
          hi: rows.map((r) => num(r, iHi)),
        },
        color: c,
        line: false,
        markers: true,
        role: "sim",
      });
      const withPred = rows.filter((r) => isFinite(num(r, iPred)));
      if (withPred.length > 0) {
        series.push({
          label: label(inp, `${det} predicted`),
          x: withPred.map((r) => num(r, iSnr)),
          y: withPred.map((r) => num(r, iPred)),
          color: c,
          line: true,
          markers: false,
          role: "pred",
        });
      }
    }
  }
  return series;
}

function serVsIter(spec: PlotSpec): Series[] {
  return spec.inputs.map((inp, k) => {
    const t = readTable(inp.path, SCHEMAS.se);
    const iT = colIndex(t, "t");
    const iSer = colIndex(t, "ser_pred");
    if (t.rows.length === 0) {
      throw new EmptySeries(`${inp.path}: no iterations`);
    }
    return {
      label: label(inp),
      x: t.rows.map((r) => num(r, iT)),
      y: t.rows.map((r) => num(r, iSer)),
      color: PALETTE[k % PALETTE.length],
      line: true,
      markers: true,
      role: "sim" as const,
    };
  });
}

function mseVsSnr(spec: PlotSpec): Series[] {
  return spec.inputs.map((inp, k) => {
    const t = readTable(inp.path, SCHEMAS.trials);
    const iSnr = colIndex(t, "snr_db");
    const iDet = colIndex(t, "detector");
    const iMse = colIndex(t, "chan_mse");
    const detectors = spec.detectors ?? ["gturbo"];
    const rows = t.rows.filter(
      (r) => detectors.includes(r[iDet]) && isFinite(num(r, iMse)));
    if (rows.length === 0) {
      throw new EmptySeries(
        `${inp.path}: no channel-MSE rows for ${detectors.join(", ")}`);
    }
    const snrs = sortedUnique(rows.map((r) => r[iSnr]));
    const means = snrs.map((snr) => {
      const vals = rows.filter((r) => r[iSnr] === snr).map((r) => num(r, iMse));
      return vals.reduce((a, b) => a + b, 0) / vals.length;
    });
    return {
      label: label(inp),
      x: snrs.map(parseFloat),
      y: means,
      color: PALETTE[k % PALETTE.length],
      line: true,
      markers: true,
      role: "sim" as const,
    };
  });
}

function paProfile(spec: PlotSpec): Series[] {
  const series: Series[] = [];
  for (const inp of spec.inputs) {
    const t = readTable(inp.path, SCHEMAS.pa);
    const iJ = colIndex(t, "j");
    const iH2 = colIndex(t, "h2");
    const iP = colIndex(t, "p");
    if (t.rows.length === 0) {
      throw new EmptySeries(`${inp.path}: no subchannels`);
    }
    const x = t.rows.map((r) => num(r, iJ));
    series.push({
      label: label(inp, "|h|^2"),
      x,
      y: t.rows.map((r) => num(r, iH2)),
      color: "#999",
      line: true,
      role: "sim",
    });
    series.push({
      label: label(inp, "allocated power"),
      x,
      y: t.rows.map((r) => num(r, iP)),
      color: PALETTE[0],
      line: true,
      role: "sim",
    });
  }
  return series;
}

const AXIS_LABELS: Record<Kind, { x: string; y: string; logY: boolean }> = {
  ser_vs_iter: { x: "iteration", y: "symbol error rate", logY: true },
  ser_vs_snr: { x: "SNR [dB]", y: "symbol error rate", logY: true },
  mse_vs_snr: { x: "SNR [dB]", y: "channel estimate MSE", logY: true },
  pa_profile: { x: "subchannel", y: "value", logY: false },
};

/** Assemble the figure for a spec; returns the SVG and a content summary. */
export function renderToString(spec: PlotSpec): { svg: string; summary: ChartSummary } {
  const builders: Record<Kind, (s: PlotSpec) => Series[]> = {
    ser_vs_iter: serVsIter,
    ser_vs_snr: serVsSnr,
    mse_vs_snr: mseVsSnr,
    pa_profile: paProfile,
  };
  const series = builders[spec.kind](spec);
  if (series.length === 0) {
    throw new EmptySeries(`${spec.kind}: no series after filtering`);
  }
  const ax = AXIS_LABELS[spec.kind];
  return buildChart({
    title: spec.title ?? spec.kind,
    xLabel: ax.x,
    yLabel: ax.y,
    logY: spec.logY ?? ax.logY,
    floor: spec.floor,
    series,
  });
}

/** Render a spec to its output file.  Returns the path and summary. */
export function render(spec: PlotSpec, outOverride?: string): { out: string; summary: ChartSummary } {
  const out = outOverride ?? spec.out;
  if (!out) {
    throw new Error("no output path: set \"out\" in the spec or pass --out");
  }
  const { svg, summary } = renderToString(spec);
  writeFileSync(out, svg);
  return { out, summary };
}

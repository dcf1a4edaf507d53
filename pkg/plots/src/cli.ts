#!/usr/bin/env node
/**
 * Render one figure from a plot spec:
 *
 *   qofdm-plots render --spec fig.json [--out fig.svg]
 *
 * The spec names the input CSVs (written by the qofdm simulator), the
 * figure kind, and the series filters; see render.ts for the format.
 */

import { loadSpec, render } from "./render";

function usage(): never {
  console.error("usage: qofdm-plots render --spec <file> [--out <path>]");
  process.exit(1);
}

function main(): void {
  const argv = process.argv.slice(2);
  if (argv[0] !== "render") usage();
  let specPath: string | undefined;
  let outPath: string | undefined;
  for (let i = 1; i < argv.length; i++) {
    if (argv[i] === "--spec") specPath = argv[++i];
    else if (argv[i] === "--out") outPath = argv[++i];
    else usage();
  }
  if (!specPath) usage();

  const spec = loadSpec(specPath);
  const { out, summary } = render(spec, outPath);
  const pts = summary.pointsPerSeries.join("/");
  console.log(
    `SVG → ${out}  (${summary.seriesCount} series, ${pts} points, ` +
    `${summary.logY ? "log" : "linear"} y` +
    (summary.predCount ? `, ${summary.predCount} prediction lines` : "") +
    (summary.clipped ? `, ${summary.clipped} values clipped to the floor` : "") +
    `)`);
}

if (require.main === module) {
  try {
    main();
  } catch (err) {
    console.error(`${(err as Error).name ?? "Error"}: ${(err as Error).message}`);
    process.exit(1);
  }
}

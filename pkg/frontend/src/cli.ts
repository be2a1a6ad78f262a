import * as fs from "fs";
import * as path from "path";

import { CsvError, parseCsv, requireColumns } from "./csv";
import { buildSeries } from "./series";
import { renderFigure } from "./svg";

interface RenderArgs {
  csv: string;
  x: string;
  y: string;
  series: string;
  out: string;
  xLabel?: string;
  yLabel?: string;
}

function parseArgs(argv: string[]): RenderArgs {
  if (argv[0] !== "render") {
    throw new Error("usage: render --csv <path> --x <col> --y <col> --series <col> --out <img>");
  }
  const opts: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`bad argument ${key}`);
    }
    opts[key.slice(2)] = argv[i + 1];
  }
  for (const required of ["csv", "x", "y", "series", "out"]) {
    if (!(required in opts)) throw new Error(`missing --${required}`);
  }
  return {
    csv: opts["csv"], x: opts["x"], y: opts["y"], series: opts["series"],
    out: opts["out"], xLabel: opts["x-label"], yLabel: opts["y-label"],
  };
}

export function runRender(argv: string[]): number {
  const args = parseArgs(argv);
  const text = fs.readFileSync(args.csv, "utf8");
  const table = parseCsv(text);
  requireColumns(table, [args.x, args.y, args.series]);
  const series = buildSeries(table, args.x, args.y, args.series);
  const svg = renderFigure(series, {
    xLabel: args.xLabel ?? args.x,
    yLabel: args.yLabel ?? args.y,
  });
  fs.mkdirSync(path.dirname(path.resolve(args.out)), { recursive: true });
  fs.writeFileSync(args.out, svg);
  console.log(`wrote ${args.out} (${series.length} series)`);
  return 0;
}

if (require.main === module) {
  try {
    process.exit(runRender(process.argv.slice(2)));
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    console.error(err instanceof CsvError ? `csv error: ${message}` : message);
    process.exit(1);
  }
}

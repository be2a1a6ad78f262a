import Papa from "papaparse";

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export class CsvError extends Error {}

/** Parse a CSV document into header + string rows, failing with row numbers. */
export function parseCsv(text: string): Table {
  const result = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  const fatal = result.errors.filter((e) => e.code !== "UndetectableDelimiter");
  if (fatal.length > 0) {
    const e = fatal[0];
    const row = e.row === undefined ? "?" : String(e.row + 2); // 1-based incl. header
    throw new CsvError(`CSV parse error at row ${row}: ${e.message}`);
  }
  const columns = (result.meta.fields ?? []).filter((c) => c.length > 0);
  if (columns.length === 0) {
    throw new CsvError("CSV has no header row");
  }
  return { columns, rows: result.data };
}

/** Ensure every referenced column exists in the header. */
export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new CsvError(
        `missing column '${name}' (header has: ${table.columns.join(", ")})`
      );
    }
  }
}

/**
 * Parsing and validation of the study-result CSV/JSON schema.
 *
 * The CSV header is fixed:
 * study,M,N,R,T,seed,mean_sq_gap,stderr,slope,slope_err,runtime_s,extra
 * with `extra` a JSON object per row.  The JSON mirror holds the same rows
 * plus config/metadata.  Figures never recompute statistics; everything
 * they display comes from these fields.
 */

import Papa from "papaparse";

export const CSV_COLUMNS = [
  "study", "M", "N", "R", "T", "seed",
  "mean_sq_gap", "stderr", "slope", "slope_err", "runtime_s", "extra",
] as const;

export interface StudyRow {
  study: string;
  M: number;
  N: number;
  R: number;
  T: number;
  seed: number;
  mean_sq_gap: number | null;
  stderr: number | null;
  slope: number | null;
  slope_err: number | null;
  runtime_s: number;
  extra: Record<string, unknown>;
}

export interface StudyData {
  study: string;
  rows: StudyRow[];
  metadata: Record<string, unknown>;
  sourcePath: string;
}

export class SchemaError extends Error {}
export class EmptyInputError extends Error {}

function toNumber(field: string, raw: unknown): number {
  const v = typeof raw === "number" ? raw : Number(raw);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`column ${field}: expected a number, got ${JSON.stringify(raw)}`);
  }
  return v;
}

function toOptionalNumber(field: string, raw: unknown): number | null {
  if (raw === null || raw === undefined || raw === "") return null;
  return toNumber(field, raw);
}

function rowFromRecord(rec: Record<string, unknown>): StudyRow {
  let extra: Record<string, unknown> = {};
  const rawExtra = rec.extra;
  if (typeof rawExtra === "string" && rawExtra !== "") {
    try {
      extra = JSON.parse(rawExtra);
    } catch (err) {
      throw new SchemaError(`column extra: invalid JSON (${(err as Error).message})`);
    }
  } else if (rawExtra && typeof rawExtra === "object") {
    extra = rawExtra as Record<string, unknown>;
  }
  return {
    study: String(rec.study ?? ""),
    M: toNumber("M", rec.M),
    N: toNumber("N", rec.N),
    R: toNumber("R", rec.R),
    T: toNumber("T", rec.T),
    seed: toNumber("seed", rec.seed),
    mean_sq_gap: toOptionalNumber("mean_sq_gap", rec.mean_sq_gap),
    stderr: toOptionalNumber("stderr", rec.stderr),
    slope: toOptionalNumber("slope", rec.slope),
    slope_err: toOptionalNumber("slope_err", rec.slope_err),
    runtime_s: toOptionalNumber("runtime_s", rec.runtime_s) ?? 0,
    extra,
  };
}

export function parseCsv(text: string, sourcePath: string): StudyData {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new SchemaError(`${sourcePath}: CSV parse error at row ${e.row}: ${e.message}`);
  }
  const header = parsed.meta.fields ?? [];
  for (let i = 0; i < CSV_COLUMNS.length; i++) {
    if (header[i] !== CSV_COLUMNS[i]) {
      throw new SchemaError(
        `${sourcePath}: column ${i + 1} is ${JSON.stringify(header[i])}, expected "${CSV_COLUMNS[i]}"`,
      );
    }
  }
  if (header.length !== CSV_COLUMNS.length) {
    throw new SchemaError(
      `${sourcePath}: unexpected extra column ${JSON.stringify(header[CSV_COLUMNS.length])}`,
    );
  }
  const rows = parsed.data.map(rowFromRecord);
  if (rows.length === 0) {
    throw new EmptyInputError(`${sourcePath}: no data rows`);
  }
  return { study: rows[0].study, rows, metadata: {}, sourcePath };
}

export function parseJson(text: string, sourcePath: string): StudyData {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    throw new SchemaError(`${sourcePath}: invalid JSON (${(err as Error).message})`);
  }
  if (typeof doc !== "object" || doc === null || !Array.isArray((doc as any).rows)) {
    throw new SchemaError(`${sourcePath}: expected an object with a "rows" array`);
  }
  const d = doc as { study?: unknown; rows: unknown[]; metadata?: unknown };
  const rows = d.rows.map((r) => rowFromRecord(r as Record<string, unknown>));
  if (rows.length === 0) {
    throw new EmptyInputError(`${sourcePath}: no data rows`);
  }
  return {
    study: String(d.study ?? rows[0].study),
    rows,
    metadata: (d.metadata as Record<string, unknown>) ?? {},
    sourcePath,
  };
}

export function parseFile(path: string, text: string): StudyData {
  return path.endsWith(".json") ? parseJson(text, path) : parseCsv(text, path);
}

/**
 * Acceptance-band bookkeeping for the one-page summary.
 *
 * Bands mirror the harness's criteria: slope -1 +- 0.2 for the stochastic
 * rate, -4 +- 0.4 for the deterministic rate, <= -0.5 for the rough decay,
 * z-score and certificate flags for the rest.  Verdicts are computed from
 * the persisted fields only.
 */

import type { StudyData, StudyRow } from "./schema.js";

export interface Verdict {
  study: string;
  source: string;
  band: string;
  passed: boolean | null; // null: no band defined for this study kind
  detail: string;
}

function slopeOf(rows: StudyRow[]): number | null {
  return rows.find((r) => r.slope !== null)?.slope ?? null;
}

export function evaluate(data: StudyData): Verdict {
  const rows = data.rows;
  const base = { study: data.study, source: data.sourcePath };
  switch (data.study) {
    case "gap-vs-n": {
      const s = slopeOf(rows);
      const ok = s !== null && Math.abs(s - -1.0) <= 0.2;
      return { ...base, band: "slope -1 +- 0.2", passed: ok,
               detail: s === null ? "no slope" : `slope ${s.toPrecision(6)}` };
    }
    case "det-order": {
      const s = slopeOf(rows);
      const ok = s !== null && Math.abs(s - -4.0) <= 0.4;
      return { ...base, band: "slope -4 +- 0.4", passed: ok,
               detail: s === null ? "no slope" : `slope ${s.toPrecision(6)}` };
    }
    case "rough": {
      const s = slopeOf(rows);
      const means = rows.map((r) => r.mean_sq_gap ?? NaN);
      const decreasing = means.every((m, i) => i === 0 || m < means[i - 1]);
      const ok = s !== null && s <= -0.5 && decreasing;
      return { ...base, band: "slope <= -0.5, means strictly decreasing", passed: ok,
               detail: `slope ${s === null ? "n/a" : s.toPrecision(6)}, decreasing=${decreasing}` };
    }
    case "qv": {
      const frac = rows[0]?.extra["frac_sites_z_le_3"];
      const ok = typeof frac === "number" && frac >= 0.95;
      return { ...base, band: ">= 95% of sites with |z| <= 3", passed: ok,
               detail: `frac ${String(frac)}` };
    }
    case "duality": {
      const regular = rows.filter((r) => r.extra["kind"] === "regular");
      const singular = rows.filter((r) => r.extra["kind"] === "singular");
      const ok =
        regular.every((r) => r.extra["per_time_pass"] === true) &&
        singular.every((r) => r.extra["stable"] === true);
      return { ...base, band: "all per-time certificates pass, singular ratios stable", passed: ok,
               detail: `${regular.length} regular, ${singular.length} singular` };
    }
    case "stability": {
      const ratios = rows
        .map((r) => r.extra["ratio"])
        .filter((x): x is number => typeof x === "number" && isFinite(x));
      const certified = rows.every((r) => r.extra["certified"] === true);
      const spread = ratios.length ? Math.max(...ratios) / Math.min(...ratios) : NaN;
      const ok = certified && isFinite(spread) && spread <= 2.0;
      return { ...base, band: "ratio spread <= 2x, smallness certified", passed: ok,
               detail: `spread ${isFinite(spread) ? spread.toPrecision(4) : "n/a"}` };
    }
    default:
      return { ...base, band: "none", passed: null, detail: `${rows.length} rows` };
  }
}

export function summaryText(verdicts: Verdict[], figures: string[]): string {
  const lines: string[] = ["study result summary", "====================", ""];
  for (const v of verdicts) {
    const mark = v.passed === null ? "----" : v.passed ? "PASS" : "FAIL";
    lines.push(`${mark}  ${v.study}  [${v.band}]  ${v.detail}  (${v.source})`);
  }
  lines.push("");
  lines.push(`figures: ${figures.join(", ")}`);
  const failed = verdicts.filter((v) => v.passed === false).length;
  lines.push(`bands passed: ${verdicts.filter((v) => v.passed === true).length}, failed: ${failed}`);
  lines.push("");
  return lines.join("\n");
}

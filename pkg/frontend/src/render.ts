/** Batch rendering: inputs -> one SVG per study + combined summary. */

import * as fs from "node:fs";
import * as path from "node:path";

import { figureSpec, renderFigure } from "./figure.js";
import { parseFile, StudyData } from "./schema.js";
import { evaluate, summaryText, Verdict } from "./summary.js";

export interface RenderResult {
  figures: string[];
  summaryPath: string;
  verdicts: Verdict[];
}

export function render(inputs: string[], outDir: string): RenderResult {
  if (inputs.length === 0) {
    throw new Error("no input files given");
  }
  const datasets: StudyData[] = inputs.map((p) => parseFile(p, fs.readFileSync(p, "utf-8")));
  fs.mkdirSync(outDir, { recursive: true });
  const figures: string[] = [];
  const used = new Set<string>();
  for (const d of datasets) {
    let stem = d.study;
    if (used.has(stem)) {
      stem = `${d.study}-${path.basename(d.sourcePath).replace(/\.[^.]+$/, "")}`;
    }
    used.add(stem);
    const outPath = path.join(outDir, `${stem}.svg`);
    fs.writeFileSync(outPath, renderFigure(figureSpec(d.study, d.rows, outPath)));
    figures.push(outPath);
  }
  const verdicts = datasets.map(evaluate);
  const summaryPath = path.join(outDir, "summary.txt");
  fs.writeFileSync(summaryPath, summaryText(verdicts, figures));
  return { figures, summaryPath, verdicts };
}

#!/usr/bin/env node
/**
 * CLI: sktlab-plots render --in FILES... --out DIR
 *
 * Consumes the experiments CSV/JSON schema verbatim and emits one annotated
 * log-log SVG per study plus a one-page summary.  Exits nonzero on schema
 * mismatch or empty input.
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { render } from "./render.js";
import { EmptyInputError, SchemaError } from "./schema.js";

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .command("render", "render figures from study results", (y) =>
      y
        .option("in", { type: "string", array: true, demandOption: true, describe: "input CSV/JSON files" })
        .option("out", { type: "string", demandOption: true, describe: "output directory" }),
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      throw err ?? new Error(msg);
    })
    .parse();

  const inputs = (args.in as string[] | undefined) ?? [];
  try {
    const result = render(inputs, args.out as string);
    for (const f of result.figures) {
      console.log(`wrote ${f}`);
    }
    console.log(`wrote ${result.summaryPath}`);
    for (const v of result.verdicts) {
      const mark = v.passed === null ? "----" : v.passed ? "PASS" : "FAIL";
      console.log(`${mark}  ${v.study}  ${v.detail}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof EmptyInputError) {
      console.error(String(err));
      return 2;
    }
    console.error(String(err));
    return 1;
  }
}

import { pathToFileURL } from "node:url";

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  main(hideBin(process.argv)).then((code) => process.exit(code));
}

import { ApiClient } from "./api.js";
import type { QueryFormModel, ReportDocument } from "./types.js";
import { formToSpec, validateForm } from "./validate.js";

export class InvalidForm extends Error {
  constructor(readonly fieldErrors: { field: string; message: string }[]) {
    super("form failed client-side validation");
  }
}

export class QueryFailed extends Error {
  constructor(readonly detail: string | undefined) {
    super(`query failed${detail ? `: ${detail}` : ""}`);
  }
}

export interface PollUpdate {
  queryId: string;
  state: string;
  progress: number;
}

export interface PollOptions {
  intervalMs?: number;
  onUpdate?: (update: PollUpdate) => void;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

/**
 * Validate locally, submit, then poll (1 s by default, one in-flight poll at
 * a time) until the query completes; resolves with the final report.
 * Invalid forms never reach the network.
 */
export async function submitAndPoll(
  client: ApiClient,
  form: QueryFormModel,
  options: PollOptions = {},
): Promise<{ queryId: string; report: ReportDocument }> {
  const errors = validateForm(form);
  if (errors.length > 0) throw new InvalidForm(errors);
  const interval = options.intervalMs ?? 1000;
  const sleep = options.sleep ?? defaultSleep;

  const queryId = await client.submit(formToSpec(form));
  for (;;) {
    const status = await client.status(queryId);
    options.onUpdate?.({ queryId, state: status.state, progress: status.progress });
    if (status.state === "failed") throw new QueryFailed(status.detail);
    if (status.state === "done") break;
    await sleep(interval);
  }
  const report = await client.report(queryId);
  if (report === null) throw new QueryFailed("finished without a report");
  return { queryId, report };
}

/** Force a streaming emission, then fetch the newest report snapshot. */
export async function emitAndFetch(
  client: ApiClient,
  queryId: string,
  options: PollOptions = {},
): Promise<ReportDocument | null> {
  const interval = options.intervalMs ?? 250;
  const sleep = options.sleep ?? defaultSleep;
  await client.emitNow(queryId);
  for (let attempt = 0; attempt < 40; attempt++) {
    const report = await client.report(queryId);
    if (report !== null) return report;
    await sleep(interval);
  }
  return null;
}

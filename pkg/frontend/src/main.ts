import { ApiClient, SpecRejected } from "./api.js";
import { emitAndFetch, InvalidForm, submitAndPoll } from "./poll.js";
import type { ColumnInfo, QueryFormModel, ReportDocument } from "./types.js";
import { drilldown, tableRows } from "./viewmodel.js";
import { validateForm } from "./validate.js";

const client = new ApiClient("");

const el = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

let currentReport: ReportDocument | null = null;
let currentQueryId: string | null = null;

async function loadDatasets(): Promise<void> {
  const select = el<HTMLSelectElement>("dataset");
  try {
    const datasets = await client.datasets();
    select.innerHTML = "";
    if (datasets.length === 0) {
      setBanner("No datasets in the service's data directory.");
      return;
    }
    for (const name of datasets) {
      const option = document.createElement("option");
      option.value = option.textContent = name;
      select.append(option);
    }
    await loadSchema();
  } catch {
    setBanner("Service unreachable.", true);
  }
}

async function loadSchema(): Promise<void> {
  const dataset = el<HTMLSelectElement>("dataset").value;
  if (!dataset) return;
  try {
    const columns = await client.schema(dataset);
    renderPicker("metric-columns", columns.filter((c) => c.type === "numeric"));
    renderPicker("attribute-columns", columns.filter((c) => c.type === "categorical"));
    setBanner("");
  } catch {
    setBanner(`Dataset ${dataset} is missing.`, true);
  }
}

function renderPicker(containerId: string, columns: ColumnInfo[]): void {
  const container = el<HTMLDivElement>(containerId);
  container.innerHTML = "";
  columns.forEach((column, index) => {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.value = column.name;
    box.checked = index === 0;
    label.append(box, ` ${column.name}`);
    container.append(label);
  });
}

function picked(containerId: string): string[] {
  return Array.from(
    el<HTMLDivElement>(containerId).querySelectorAll<HTMLInputElement>("input:checked"),
  ).map((box) => box.value);
}

function readForm(): QueryFormModel {
  return {
    dataset: el<HTMLSelectElement>("dataset").value,
    metricColumns: picked("metric-columns"),
    attributeColumns: picked("attribute-columns"),
    minSupport: Number(el<HTMLInputElement>("min-support").value),
    minRiskRatio: Number(el<HTMLInputElement>("min-risk-ratio").value),
    outlierPercentile: Number(el<HTMLInputElement>("outlier-percentile").value),
    mode: el<HTMLSelectElement>("mode").value as QueryFormModel["mode"],
    seed: Number(el<HTMLInputElement>("seed").value),
  };
}

function renderFieldErrors(errors: { field: string; message: string }[]): void {
  document.querySelectorAll(".field-error").forEach((node) => (node.textContent = ""));
  for (const { field, message } of errors) {
    const slot = document.querySelector(`.field-error[data-field="${field}"]`);
    if (slot) slot.textContent = message;
    else setBanner(message, true);
  }
}

function setBanner(text: string, isError = false): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = text;
  banner.className = isError ? "error" : "";
}

function renderReport(report: ReportDocument): void {
  currentReport = report;
  el<HTMLDivElement>("summary").textContent =
    `${report.pointsProcessed.toLocaleString()} points, ` +
    `${report.outlierCount.toLocaleString()} outliers, ` +
    `${report.explanations.length} explanation(s) — query ${report.queryId}`;
  const body = el<HTMLTableSectionElement>("results-body");
  body.innerHTML = "";
  tableRows(report).forEach((row, index) => {
    const tr = document.createElement("tr");
    const flags = row.flags.length ? ` ⚑` : "";
    tr.innerHTML =
      `<td>${row.chips.join(", ")}${flags}</td><td>${row.support}</td>` +
      `<td>${row.riskRatio}</td><td>${row.interval}</td><td>${row.counts}</td>`;
    tr.title = row.flags.join(", ");
    tr.addEventListener("click", () => renderDrilldown(index));
    body.append(tr);
  });
}

function renderDrilldown(index: number): void {
  if (!currentReport) return;
  const view = drilldown(currentReport.explanations[index], currentReport);
  el<HTMLDivElement>("drilldown").innerHTML = `
    <h3>${view.chips.join(", ")}</h3>
    <p>support ${view.support} · risk ratio ${view.riskRatio} · CI ${view.interval}
       · ${view.numTests} test(s)</p>
    <p>a_o=${view.counts.ao} a_i=${view.counts.ai}
       b_o=${view.counts.bo} b_i=${view.counts.bi}</p>
    ${view.notes.map((n) => `<p class="note">${n}</p>`).join("")}
    <details><summary>Copy config</summary>
      <textarea readonly rows="12">${view.configSnippet}</textarea>
    </details>`;
}

async function run(): Promise<void> {
  const form = readForm();
  renderFieldErrors(validateForm(form));
  setBanner("");
  try {
    const { queryId, report } = await submitAndPoll(client, form, {
      onUpdate: (update) =>
        setBanner(`query ${update.queryId}: ${update.state} (${update.progress})`),
    });
    currentQueryId = queryId;
    el<HTMLButtonElement>("emit-now").disabled = form.mode !== "streaming";
    setBanner("");
    renderReport(report);
  } catch (error) {
    if (error instanceof InvalidForm) renderFieldErrors(error.fieldErrors);
    else if (error instanceof SpecRejected) renderFieldErrors(error.fieldErrors);
    else setBanner(String(error), true);
  }
}

async function emitNow(): Promise<void> {
  if (!currentQueryId) return;
  const report = await emitAndFetch(client, currentQueryId);
  if (report) renderReport(report);
}

el<HTMLButtonElement>("run").addEventListener("click", () => void run());
el<HTMLButtonElement>("emit-now").addEventListener("click", () => void emitNow());
el<HTMLSelectElement>("dataset").addEventListener("change", () => void loadSchema());
el<HTMLButtonElement>("reload-datasets").addEventListener("click", () => void loadDatasets());
void loadDatasets();

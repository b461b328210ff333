import init, { simulate, count, trace, default_table } from "./pkg/digcount_web.js";

const $ = (id) => document.getElementById(id);

function show(target, f) {
  try {
    target.innerHTML = f();
  } catch (e) {
    target.innerHTML = `<p class="error">${escape(String(e))}</p>`;
  }
}

function escape(s) {
  return s.replace(/[&<>]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" })[c]);
}

const f2 = (x) => x.toFixed(2);

function simTable(res) {
  const methods = res.rows[0]?.methods.map((m) => m.method) ?? [];
  let h = "<table><tr><th>video</th><th>frames</th><th>Tr</th>";
  for (const m of methods) h += `<th>${m} CT</th><th>fake</th><th>missing</th><th>F1</th>`;
  h += "</tr>";
  for (const row of res.rows) {
    h += `<tr><td>${escape(row.video)}</td><td>${row.frames}</td><td>${row.truth}</td>`;
    for (const m of row.methods) h += `<td>${m.ct}</td><td>${m.fake}</td><td>${m.missing}</td><td>${f2(m.f1)}</td>`;
    h += "</tr>";
  }
  return h + "</table>";
}

function traceTable(trace) {
  let h = "<table><tr><th>t</th><th>event</th><th>from</th><th>to</th><th>accepted</th><th>count</th></tr>";
  for (const r of trace) {
    const mark = r.counted ? " style=\"background:#dfd\"" : "";
    h += `<tr${mark}><td>${f2(r.t)}</td><td>${r.event}</td><td>${r.state_before}</td><td>${r.state_after}</td><td>${r.accepted ? "yes" : ""}</td><td>${r.count}</td></tr>`;
  }
  return h + "</table>";
}

await init();
$("table").value = default_table();

$("run-sim").onclick = () =>
  show($("sim-out"), () => {
    const res = JSON.parse(simulate($("scenario").value, Number($("replicate").value) || 0));
    if (res.stream) $("detections").value = res.stream;
    return simTable(res);
  });

$("run-count").onclick = () =>
  show($("count-out"), () => {
    const res = JSON.parse(count($("detections").value, $("table").value));
    const counts = res.counts.map((c) => `<li>${escape(c.method)}: <b>${c.count}</b> at ${c.completion_times.map(f2).join(", ") || "none"} s</li>`);
    const accepted = res.trace.filter((r) => r.accepted);
    return `<p>${res.frames_seen} frames, ${res.frames_processed} processed, ${res.events} events</p><ul>${counts.join("")}</ul>` +
      `<details><summary>accepted state-machine steps (${accepted.length})</summary>${traceTable(accepted)}</details>`;
  });

$("run-trace").onclick = () =>
  show($("trace-out"), () => {
    const res = JSON.parse(trace($("codes").value, $("table").value));
    return `<p>final state ${res.state}, workloads ${res.count}</p>${traceTable(res.trace)}`;
  });

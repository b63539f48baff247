import init, { presets, run_preset, sample_priorities, chain_oracle } from "./pkg/replaylab_demo.js";

const $ = (id) => document.getElementById(id);
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"];

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "12px sans-serif";
  return ctx;
}

function lines(canvas, series, { logY = false, xLabel = "" } = {}) {
  const ctx = clear(canvas);
  const pad = { l: 60, r: 10, t: 20, b: 30 };
  const w = canvas.width - pad.l - pad.r;
  const h = canvas.height - pad.t - pad.b;
  const tf = (v) => (logY ? Math.log10(Math.max(v, 1e-12)) : v);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y.map(tf));
  if (!xs.length) return;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs) || 1];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 === y0) y1 = y0 + 1;
  const px = (x) => pad.l + ((x - x0) / (x1 - x0 || 1)) * w;
  const py = (y) => pad.t + h - ((tf(y) - y0) / (y1 - y0)) * h;
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad.l, pad.t, w, h);
  ctx.fillStyle = "#444";
  const fmt = (v) => (logY ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(fmt(y1), 4, pad.t + 10);
  ctx.fillText(fmt(y0), 4, pad.t + h);
  ctx.fillText(`${x0}`, pad.l, canvas.height - 8);
  ctx.fillText(`${x1} ${xLabel}`, pad.l + w - 80, canvas.height - 8);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color ?? PALETTE[k % PALETTE.length];
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
    ctx.stroke();
    ctx.fillStyle = ctx.strokeStyle;
    ctx.fillText(s.name, pad.l + 8 + 140 * k, pad.t - 6);
  });
}

function heatmap(canvas, rows, steps, title) {
  const ctx = clear(canvas);
  if (!rows.length) {
    ctx.fillText("no heatmap for this preset", 10, 20);
    return;
  }
  const pad = { l: 60, t: 20 };
  const cw = (canvas.width - pad.l - 10) / rows[0].length;
  const rh = (canvas.height - pad.t - 10) / rows.length;
  const flat = rows.flat();
  const lo = Math.min(...flat);
  const hi = Math.max(...flat);
  rows.forEach((row, r) =>
    row.forEach((v, c) => {
      const t = hi > lo ? (v - lo) / (hi - lo) : 0;
      ctx.fillStyle = `hsl(${240 - 240 * t}, 80%, ${25 + 45 * t}%)`;
      ctx.fillRect(pad.l + c * cw, pad.t + r * rh, Math.ceil(cw), Math.ceil(rh));
    }),
  );
  ctx.fillStyle = "#444";
  ctx.fillText(`${title}: state 1..${rows[0].length} across, snapshot step ${steps[0]}..${steps[steps.length - 1]} down, range [${lo.toPrecision(3)}, ${hi.toPrecision(3)}]`, pad.l, 14);
}

function bars(canvas, groups, names) {
  const ctx = clear(canvas);
  const pad = { l: 40, b: 24, t: 20 };
  const n = groups[0].length;
  const h = canvas.height - pad.b - pad.t;
  const max = Math.max(...groups.flat(), 1e-12);
  const slot = (canvas.width - pad.l - 10) / n;
  const bw = (slot * 0.8) / groups.length;
  groups.forEach((g, k) => {
    ctx.fillStyle = PALETTE[k];
    g.forEach((v, i) => {
      const bh = (v / max) * h;
      ctx.fillRect(pad.l + i * slot + k * bw, pad.t + h - bh, bw - 1, bh);
    });
    ctx.fillText(names[k], pad.l + 120 * k, 14);
  });
  ctx.fillStyle = "#444";
  for (let i = 0; i < n; i++) ctx.fillText(`${i}`, pad.l + i * slot + slot * 0.35, canvas.height - 8);
  ctx.fillText(max.toPrecision(3), 2, pad.t + 10);
}

function guard(statusId, fn) {
  return () => {
    const status = $(statusId);
    status.className = "note";
    status.textContent = "working...";
    setTimeout(() => {
      try {
        const t0 = performance.now();
        fn();
        status.textContent += ` (${((performance.now() - t0) / 1000).toFixed(2)} s)`;
      } catch (e) {
        status.className = "err";
        status.textContent = String(e);
      }
    }, 10);
  };
}

function doRun() {
  const overrides = [
    `agent.variant=${$("run-variant").value}`,
    `horizon=${$("run-horizon").value}`,
    $("run-overrides").value,
  ].join("\n");
  const result = JSON.parse(run_preset($("run-preset").value, overrides, Number($("run-seed").value)));
  const s = result.series[0];
  lines(
    $("run-curve"),
    [{ name: `${s.metric} (${result.label})`, x: s.values.map((_, i) => i * s.cadence), y: s.values }],
    { logY: s.metric === "msve", xLabel: "steps" },
  );
  const heat = result.heatmaps.find((m) => m.kind === "sampling_probability") ?? result.heatmaps[0];
  heatmap($("run-heat"), heat ? heat.rows : [], heat ? heat.steps : [], heat ? heat.kind : "");
  const last = s.values[s.values.length - 1];
  $("run-status").textContent = `${s.values.length} points, final ${s.metric} ${last?.toPrecision(4)}, ${result.episodes} episodes`;
}

function doSample() {
  const pri = Float64Array.from($("s-pri").value.split(/[\s,]+/).filter(Boolean).map(Number));
  const out = JSON.parse(
    sample_priorities(
      pri,
      $("s-regime").value,
      Number($("s-alpha").value),
      Number($("s-mixin").value),
      $("s-repl").checked,
      Number($("s-batch").value),
      Number($("s-draws").value),
      Number($("s-seed").value),
    ),
  );
  bars($("s-bars"), [out.exact, out.empirical], ["exact", "empirical"]);
  const tv = out.exact.reduce((a, p, i) => a + Math.abs(p - out.empirical[i]), 0) / 2;
  const note = $("s-repl").checked ? "" : "; without replacement, per-batch frequencies flatten relative to the single-draw probabilities";
  $("s-status").textContent = `${out.draws} draws, total variation ${tv.toExponential(2)}${note}`;
}

function doOracle() {
  const o = JSON.parse(chain_oracle());
  const x = o.values.map((_, i) => i + 1);
  const vmax = Math.max(...o.values);
  const dmax = Math.max(...o.visitation);
  lines($("o-plot"), [
    { name: "value / max", x, y: o.values.map((v) => v / vmax) },
    { name: "visitation / max", x, y: o.visitation.map((v) => v / dmax) },
  ], { xLabel: "state" });
  $("o-status").textContent = `v(1) = ${o.values[0].toPrecision(5)}, v(50) = ${o.values[49].toPrecision(5)}, expected episode length ${o.expected_length.toFixed(1)}`;
}

init()
  .then(() => {
    const select = $("run-preset");
    for (const p of JSON.parse(presets())) {
      if (!/pred/.test(p.name)) continue;
      const opt = document.createElement("option");
      opt.value = p.name;
      opt.textContent = p.name;
      opt.title = p.description;
      select.append(opt);
    }
    select.value = "fig3_chain_pred_tabular";
    $("run-go").onclick = guard("run-status", doRun);
    $("s-go").onclick = guard("s-status", doSample);
    $("o-go").onclick = guard("o-status", doOracle);
  })
  .catch((e) => ($("fatal").textContent = `failed to load wasm: ${e}`));

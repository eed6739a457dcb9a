import init, { capacityCurve, aepCurve, ksatDemo } from "./pkg/derand_lab_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, pad);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad, h - pad);
  ctx.stroke();
}

// xs, ys already scaled to [0, 1].
function line(ctx, w, h, pad, xs, ys, color, dash) {
  ctx.strokeStyle = color;
  ctx.setLineDash(dash || []);
  ctx.beginPath();
  xs.forEach((x, i) => {
    const px = pad + x * (w - 2 * pad);
    const py = h - pad - ys[i] * (h - 2 * pad);
    i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
  ctx.setLineDash([]);
}

function label(ctx, text, x, y) {
  ctx.fillStyle = "#444";
  ctx.fillText(text, x, y);
}

function fail(canvas, e) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#b00";
  ctx.fillText(String(e), 20, 30);
}

function plotCapacity() {
  const c = $("cap-plot");
  try {
    const rows = JSON.parse(capacityCurve(num("cap-points"))).rows;
    const ctx = c.getContext("2d");
    axes(ctx, c.width, c.height, 30);
    line(ctx, c.width, c.height, 30, rows.map((r) => r.p), rows.map((r) => r.capacity), "#1f5fbf");
    label(ctx, "C", 10, 30);
    label(ctx, "p = 0", 25, c.height - 12);
    label(ctx, "1", c.width - 35, c.height - 12);
  } catch (e) {
    fail(c, e);
  }
}

function plotAep() {
  const c = $("aep-plot");
  const ns = [10, 25, 50, 100, 200, 400];
  try {
    const out = JSON.parse(aepCurve(num("aep-p"), num("aep-eps"), Uint32Array.from(ns), num("aep-trials"), $("aep-seed").value));
    const ctx = c.getContext("2d");
    const w = c.width, h = c.height, pad = 30;
    axes(ctx, w, h, pad);
    const xs = out.rows.map((r) => r.n / ns[ns.length - 1]);
    line(ctx, w, h, pad, xs, out.rows.map((r) => r.typical), "#1f5fbf");
    // log10 of the independent fraction, floored at 1e-6.
    const lg = (v) => Math.max(0, 1 + Math.log10(Math.max(v, 1e-6)) / 6);
    line(ctx, w, h, pad, xs, out.rows.map((r) => lg(r.independent)), "#bf5f1f", [5, 4]);
    line(ctx, w, h, pad, xs, out.rows.map((r) => lg(Math.min(1, r.independent_bound))), "#999", [2, 3]);
    label(ctx, "I(X:Y) = " + out.mutual_information.toFixed(4), w - 160, 20);
    out.rows.forEach((r, i) => label(ctx, String(r.n), pad + xs[i] * (w - 2 * pad) - 8, h - 12));
  } catch (e) {
    fail(c, e);
  }
}

function runKsat() {
  const out = $("ks-out");
  out.className = "";
  out.textContent = "working...";
  setTimeout(() => {
    try {
      const r = JSON.parse(ksatDemo(num("ks-n"), num("ks-k"), num("ks-m"), num("ks-bits"), $("ks-seed").value));
      out.textContent = JSON.stringify(r, null, 2);
    } catch (e) {
      out.className = "err";
      out.textContent = String(e);
    }
  }, 10);
}

await init();
$("cap-run").onclick = plotCapacity;
$("aep-run").onclick = plotAep;
$("ks-run").onclick = runKsat;
plotCapacity();

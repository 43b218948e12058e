import init, { simulatePlay, simulateFlow, stabilityReport, stabilityMap } from "./pkg/sdgan_web_demo.js";

const STRIDE = 4;
const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function params() {
  return {
    etaG: num("eta_g"), etaD: num("eta_d"), etaPhi: num("eta_phi"),
    alpha: num("alpha"), c: num("c"), theta0: num("theta0"), psi0: num("psi0"),
  };
}

function guard(fn) {
  return () => {
    $("error").textContent = "";
    try { fn(); } catch (e) { $("error").textContent = String(e.message ?? e); }
  };
}

function bounds(xs) {
  let lo = Infinity, hi = -Infinity;
  for (const x of xs) { if (x < lo) lo = x; if (x > hi) hi = x; }
  if (lo === hi) { lo -= 1; hi += 1; }
  return [lo, hi];
}

function polyline(ctx, xs, ys, color, [x0, x1], [y0, y1]) {
  const { width: w, height: h } = ctx.canvas;
  const pad = 12;
  const sx = (x) => pad + (x - x0) / (x1 - x0) * (w - 2 * pad);
  const sy = (y) => h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad);
  ctx.strokeStyle = color;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
}

function drawTrajectory(flat) {
  const n = flat.length / STRIDE;
  const t = [], theta = [], psi = [], r = [];
  for (let i = 0; i < n; i++) {
    t.push(flat[i * STRIDE]);
    theta.push(flat[i * STRIDE + 1]);
    psi.push(flat[i * STRIDE + 2]);
    r.push(Math.hypot(theta[i], psi[i]));
  }
  const phase = $("phase").getContext("2d");
  phase.clearRect(0, 0, phase.canvas.width, phase.canvas.height);
  const m = Math.max(...theta.map(Math.abs), ...psi.map(Math.abs), 1e-9);
  polyline(phase, [-m, m], [0, 0], "#ccc", [-m, m], [-m, m]);
  polyline(phase, [0, 0], [-m, m], "#ccc", [-m, m], [-m, m]);
  polyline(phase, theta, psi, "#1f5fbf", [-m, m], [-m, m]);

  const rad = $("radius").getContext("2d");
  rad.clearRect(0, 0, rad.canvas.width, rad.canvas.height);
  polyline(rad, t, r, "#bf5f1f", bounds(t), [0, Math.max(...r)]);
}

function runTrajectory() {
  const p = params();
  const mode = document.querySelector("input[name=mode]:checked").value;
  const flat = mode === "flow"
    ? simulateFlow(p.etaG, p.etaD, p.etaPhi, p.alpha, p.c, num("t_end"), p.theta0, p.psi0)
    : simulatePlay(num("lr"), p.alpha, num("beta"), Math.round(num("steps")), p.theta0, p.psi0);
  drawTrajectory(flat);
}

function classify() {
  const p = params();
  const s = stabilityReport(p.etaG, p.etaD, p.etaPhi, p.alpha, p.c);
  const eig = [0, 1, 2].map((i) => `${s[2 * i].toExponential(4)} ${s[2 * i + 1] < 0 ? "-" : "+"} ${Math.abs(s[2 * i + 1]).toExponential(4)}i`);
  $("report").textContent = [
    "eigenvalues:", ...eig.map((e) => "  " + e),
    `margin a2·a1 - a3·a0: ${s[6].toExponential(4)}`,
    `Routh-Hurwitz: ${s[7] ? "stable" : "not asymptotically stable"}`,
    `max Re λ: ${s[8].toExponential(4)}`,
  ].join("\n");
}

function drawMap() {
  const p = params();
  const canvas = $("heat");
  const ctx = canvas.getContext("2d");
  const n = 120;
  const v = stabilityMap(p.etaG, p.etaD, p.c, num("alpha_max"), num("eta_phi_max"), n);
  const lo = Math.min(...v);
  const img = ctx.createImageData(n, n);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const x = v[i * n + j];
      const k = 4 * ((n - 1 - i) * n + j);
      const depth = lo < 0 ? Math.sqrt(x / lo) : 0;
      const marginal = Math.abs(x) < 1e-9;
      img.data[k] = marginal ? 200 : 255 * (1 - depth);
      img.data[k + 1] = marginal ? 40 : 255 * (1 - 0.4 * depth);
      img.data[k + 2] = marginal ? 40 : 255;
      img.data[k + 3] = 255;
    }
  }
  const tmp = new OffscreenCanvas(n, n);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#000";
  ctx.fillText("α ↑   η_φ →   (red: α = 0, marginal)", 8, 14);
}

await init();
$("run").addEventListener("click", guard(runTrajectory));
$("spec").addEventListener("click", guard(classify));
$("map").addEventListener("click", guard(drawMap));
guard(runTrajectory)();
guard(classify)();
guard(drawMap)();

import init, { coverage_curves, load_sweep, sample_network } from "./pkg/hetnet_web.js";

const $ = (id) => document.getElementById(id);
const LAMBDA_B = 5e-6;

function scenario() {
  const kind = $("policy").value;
  const share = parseFloat($("share").value);
  const policy = kind === "ssa" ? { kind, p_m: share } : kind === "osa" ? { kind, p_o: share } : { kind };
  return JSON.stringify({
    policy,
    lambda_m_per_min_m2: parseFloat($("lm").value),
    lambda_f_per_m2: parseFloat($("ratio").value) * LAMBDA_B,
    region_threshold: parseFloat($("region").value),
  });
}

function axes(ctx, w, h, pad, xlab, ylab) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  ctx.fillStyle = "#444";
  ctx.fillText(xlab, w / 2, h - 8);
  ctx.save();
  ctx.translate(12, h / 2);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylab, 0, 0);
  ctx.restore();
}

function plot(canvas, xs, series, opts) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 50;
  axes(ctx, w, h, pad, opts.xlab, opts.ylab);
  const tx = (x) => pad + ((opts.xmap(x) - opts.xmap(xs[0])) / (opts.xmap(xs.at(-1)) - opts.xmap(xs[0]))) * (w - 1.5 * pad);
  const ty = (y) => h - pad - ((y - opts.ymin) / (opts.ymax - opts.ymin)) * (h - 1.5 * pad);
  ctx.fillStyle = "#444";
  for (let i = 0; i <= 4; i++) {
    const y = opts.ymin + ((opts.ymax - opts.ymin) * i) / 4;
    ctx.fillText(opts.yfmt(y), 4 + 20, ty(y) + 4);
  }
  for (const x of [xs[0], xs[Math.floor(xs.length / 2)], xs.at(-1)]) ctx.fillText(opts.xfmt(x), tx(x) - 12, h - pad + 16);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    let pen = false;
    xs.forEach((x, i) => {
      const y = s.ys[i];
      if (y == null || !isFinite(y)) { pen = false; return; }
      const py = ty(opts.ytrans ? opts.ytrans(y) : y);
      pen ? ctx.lineTo(tx(x), py) : ctx.moveTo(tx(x), py);
      pen = true;
    });
    ctx.stroke();
  }
}

function drawCoverage(cfg) {
  const c = JSON.parse(coverage_curves(cfg, -10, 25, 71));
  $("curve-info").textContent = `converged activity: center ${c.zeta_center.toFixed(3)}, edge ${c.zeta_edge.toFixed(3)}`;
  plot($("coverage"), c.threshold_db, [
    { ys: c.ccu, color: "#1f77b4" },
    { ys: c.ceu, color: "#d62728" },
  ], { xmap: (x) => x, xlab: "threshold (dB)", ylab: "coverage", ymin: 0, ymax: 1, yfmt: (y) => y.toFixed(2), xfmt: (x) => x.toFixed(0) });
}

function drawSweep(cfg) {
  const s = JSON.parse(load_sweep(cfg, 5e-5, 6e-4, 24));
  const col = (name) => s.columns.find((c) => c[0] === name)[1];
  const metric = $("metric").value;
  let series, ymin = 0, ymax = 1, yfmt = (y) => y.toFixed(2), ytrans;
  if (metric === "zeta") {
    series = [{ ys: col("zeta_center"), color: "#1f77b4" }, { ys: col("zeta_edge"), color: "#d62728" }];
  } else if (metric === "blocking") {
    ytrans = (y) => Math.max(-12, Math.log10(Math.max(y, 1e-12)));
    ymin = -12; ymax = 0; yfmt = (y) => `1e${y.toFixed(0)}`;
    series = [{ ys: col("b_ccu"), color: "#1f77b4" }, { ys: col("b_ceu"), color: "#d62728" }, { ys: col("b_network"), color: "#555" }];
  } else {
    const eta = col("eta_bps_per_j_m2");
    ymax = Math.max(...eta.filter((v) => v != null)) * 1.1;
    series = [{ ys: eta, color: "#2ca02c" }];
  }
  plot($("sweep"), s.lambda_m, series, {
    xmap: Math.log, xlab: "lambda_M (per min m^2, log scale)", ylab: metric, ymin, ymax, yfmt, ytrans,
    xfmt: (x) => x.toExponential(1),
  });
}

function drawNetwork(cfg) {
  const n = JSON.parse(sample_network(cfg, parseFloat($("mbs").value), parseInt($("users").value), BigInt($("seed").value)));
  const canvas = $("network");
  const ctx = canvas.getContext("2d");
  const half = canvas.width / 2;
  const k = half / n.radius;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (const [x, y, , center] of n.users) {
    ctx.fillStyle = center ? "rgba(31,119,180,.6)" : "rgba(214,39,40,.6)";
    ctx.fillRect(half + x * k - 1, half - y * k - 1, 2, 2);
  }
  ctx.fillStyle = "#000";
  for (const [x, y] of n.mbs) {
    ctx.beginPath();
    ctx.moveTo(half + x * k, half - y * k - 5);
    ctx.lineTo(half + x * k - 4, half - y * k + 3);
    ctx.lineTo(half + x * k + 4, half - y * k + 3);
    ctx.fill();
  }
  const r = parseFloat($("region").value);
  $("net-info").textContent = `${n.mbs.length} MBSs, center fraction ${n.center_fraction.toFixed(3)} (expected ${(r * r).toFixed(3)})`;
}

function guarded(fn) {
  try {
    $("error").textContent = "";
    fn(scenario());
  } catch (e) {
    $("error").textContent = String(e.message ?? e);
  }
}

await init();
const all = () => guarded((cfg) => { drawCoverage(cfg); drawSweep(cfg); drawNetwork(cfg); });
$("run").onclick = all;
$("metric").onchange = () => guarded(drawSweep);
$("resample").onclick = () => guarded(drawNetwork);
all();

// Expects wasm-bindgen output (--target web) in ./pkg.
import init, { Scan, shrink_curve } from "./pkg/pmri_web.js";

const $ = (id) => document.getElementById(id);
let scan = null;

function draw(id, pixels, n) {
  const canvas = $(id);
  canvas.width = n;
  canvas.height = n;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  let lo = Infinity, hi = -Infinity;
  for (const v of pixels) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const span = hi > lo ? hi - lo : 1;
  for (let i = 0; i < n * n; i++) {
    const g = Math.round(255 * (pixels[i] - lo) / span);
    img.data.set([g, g, g, 255], 4 * i);
  }
  ctx.putImageData(img, 0, 0);
}

function caption(id, name, pixels) {
  $(id).textContent = `${name}: ${scan.psnr(pixels).toFixed(2)} dB, SSIM ${scan.ssim(pixels).toFixed(3)}`;
}

function num(id) { return Number($(id).value); }

function showValues() {
  for (const id of ["ratio", "maperr", "iters", "alpha", "companion"]) $(id + "-v").textContent = $(id).value;
}

function rebuild() {
  if (scan) scan.free();
  scan = new Scan(num("size"), num("coils"), num("ratio"), num("acs"), BigInt(num("seed")));
  const n = scan.size();
  draw("truth", scan.truth(), n);
  draw("mask", scan.mask(), n);
  $("mask-c").textContent = `mask, ${(100 * scan.measured_ratio()).toFixed(1)} % of lines`;
  const zf = scan.zero_filled();
  draw("zf", zf, n);
  caption("zf-c", "zero-filled", zf);
  views();
  recon();
}

function views() {
  const n = scan.size();
  draw("kspace", scan.kspace(num("coil")), n);
  draw("coilimg", scan.coil_image(num("coil")), n);
}

function recon() {
  const cg = scan.cg_sense(num("maperr"), num("iters"), 7n);
  draw("cg", cg, scan.size());
  caption("cg-c", "CG-SENSE", cg);
}

function curve() {
  const canvas = $("curve");
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, extent = 3, points = 301;
  const y = shrink_curve(num("alpha"), points, extent, $("group").checked, num("companion"));
  const px = (x) => (x + extent) / (2 * extent) * w;
  const py = (v) => h / 2 - v / extent * (h / 2);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#ccc";
  ctx.beginPath();
  ctx.moveTo(0, h / 2); ctx.lineTo(w, h / 2);
  ctx.moveTo(w / 2, 0); ctx.lineTo(w / 2, h);
  ctx.moveTo(px(-extent), py(-extent)); ctx.lineTo(px(extent), py(extent));
  ctx.stroke();
  ctx.strokeStyle = "#c00";
  ctx.beginPath();
  y.forEach((v, i) => {
    const x = -extent + 2 * extent * i / (points - 1);
    if (i === 0) ctx.moveTo(px(x), py(v)); else ctx.lineTo(px(x), py(v));
  });
  ctx.stroke();
}

function guard(f) {
  return () => {
    showValues();
    try { f(); $("status").textContent = ""; } catch (e) { $("status").textContent = String(e.message ?? e); }
  };
}

await init();
for (const id of ["size", "coils", "ratio", "acs", "seed"]) $(id).addEventListener("change", guard(rebuild));
$("coil").addEventListener("change", guard(views));
for (const id of ["maperr", "iters"]) $(id).addEventListener("input", guard(recon));
for (const id of ["alpha", "group", "companion"]) $(id).addEventListener("input", guard(curve));
guard(() => { rebuild(); curve(); })();

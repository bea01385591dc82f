import init, { kotzGammaSurface, radialDensity, tScatter } from "./pkg/multivec_web.js";

const num = (form, name) => Number(form.elements[name].value);
const nums = (form, name) => form.elements[name].value.split(",").map(Number);

function guard(id, f) {
  const err = document.getElementById(id + "-err");
  try {
    f();
    err.textContent = "";
  } catch (e) {
    err.textContent = e.message ?? String(e);
  }
}

function drawSurface() {
  const f = document.getElementById("surface");
  const canvas = document.getElementById("surface-canvas");
  const steps = 100;
  guard("surface", () => {
    const z = kotzGammaSurface(
      num(f, "sigma1"), num(f, "alpha"), num(f, "sigma2"), num(f, "beta"),
      num(f, "r"), num(f, "q"), num(f, "s"), num(f, "umax"), num(f, "vmax"), steps);
    const ctx = canvas.getContext("2d");
    const max = z.reduce((a, b) => Math.max(a, b), 0) || 1;
    const cw = canvas.width / steps, ch = canvas.height / steps;
    for (let i = 0; i < steps; i++) {
      for (let j = 0; j < steps; j++) {
        const t = Math.sqrt(z[i * steps + j] / max);
        ctx.fillStyle = `hsl(${240 - 240 * t}, 80%, ${15 + 50 * t}%)`;
        ctx.fillRect(i * cw, canvas.height - (j + 1) * ch, cw + 1, ch + 1);
      }
    }
  });
}

const CURVES = [
  ["kotz", "#1f77b4", p => [p[0], p[1], p[2]]],
  ["pearson7", "#d62728", p => [p[0], p[1], 0]],
  ["pearson2", "#2ca02c", p => [0, p[0], 0]],
  ["bessel", "#9467bd", p => [p[0], p[1], 0]],
];

function drawRadial() {
  const f = document.getElementById("radial");
  const canvas = document.getElementById("radial-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const points = 400;
  const rmax = num(f, "rmax");
  guard("radial", () => {
    const curves = CURVES.map(([name, color, args]) => {
      const [a, b, c] = args(nums(f, name));
      return [name, color, radialDensity(name, a, b, c, num(f, "dim"), rmax, points)];
    });
    const top = Math.max(...curves.flatMap(([, , y]) => Array.from(y).filter(Number.isFinite))) || 1;
    curves.forEach(([name, color, y], k) => {
      ctx.strokeStyle = color;
      ctx.beginPath();
      y.forEach((v, i) => {
        const px = ((i + 1) / points) * canvas.width;
        const py = canvas.height - (Math.min(v, top) / top) * (canvas.height - 10);
        i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
      });
      ctx.stroke();
      ctx.fillStyle = color;
      ctx.fillText(name, canvas.width - 80, 15 + 15 * k);
    });
  });
}

function drawScatter() {
  const f = document.getElementById("scatter");
  const canvas = document.getElementById("scatter-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  guard("scatter", () => {
    const ball = f.elements.pearson2.checked;
    const xy = tScatter(num(f, "n0"), num(f, "beta1"), num(f, "beta2"), ball,
      num(f, "n"), BigInt(num(f, "seed")));
    const half = ball ? 1 : 6;
    const scale = canvas.width / (2 * half);
    ctx.fillStyle = "rgba(31, 119, 180, 0.35)";
    for (let i = 0; i < xy.length; i += 2) {
      ctx.fillRect((xy[i] + half) * scale, (half - xy[i + 1]) * scale, 2, 2);
    }
  });
}

await init();
for (const [id, draw] of [["surface", drawSurface], ["radial", drawRadial], ["scatter", drawScatter]]) {
  document.getElementById(id).addEventListener("input", draw);
  draw();
}

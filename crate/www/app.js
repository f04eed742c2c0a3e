// Static front end for the charsub wasm bindings. No framework; the wasm
// package is expected in ./pkg (see the README build step).

import init, { classify_json, member_json, ball_json, trivial_radius_json }
  from "./pkg/charsub_wasm.js";

const $ = (id) => document.getElementById(id);

const SEQ_PRESETS = [
  ["geometric:2", "u_n = 2^n"],
  ["factorial", "u_n = (n+1)!"],
  ["doubleexp:2", "u_n = 2^(2^n)"],
  ["ratios:2,3:repeat", "ratios 2,3,2,3,…"],
  ["override:constant:2;at:powers:2;val:3", "ratio 3 at powers of 2"],
];

const POINT_PRESETS = [
  ["digits:const:1", "all digits 1 (e−2 over factorial)"],
  ["rational:1/5", "the rational 1/5"],
  ["rational:5/8", "the rational 5/8"],
  ["digits:periodic:|0,1", "periodic digits 0,1 (1/3 over geometric:2)"],
  ["digits:floorfrac:1/2", "digits ⌊q_n/2⌋"],
  ["xs:const:2:start:2", "alternating series, gap 2"],
];

function renderPresets(el, presets, target) {
  for (const [spec, label] of presets) {
    const b = document.createElement("button");
    b.textContent = label;
    b.title = spec;
    b.addEventListener("click", () => { $(target).value = spec; });
    el.appendChild(b);
  }
}

function triCell(v) {
  return `<td class="${v}">${v}</td>`;
}

function showClassify() {
  const out = JSON.parse(classify_json($("seq").value.trim()));
  const el = $("classify-out");
  if (out.error) { el.innerHTML = `<pre>${out.error}</pre>`; return; }
  const r = out.report;
  el.innerHTML = `
    <table>
      <tr><th>ratios bounded</th><th>countable</th><th>⊆ Q/Z</th>
          <th>F<sub>σ</sub></th><th>test-topology open</th><th>metric open</th></tr>
      <tr>${triCell(r.ratios_bounded)}${triCell(r.countable)}${triCell(r.subgroup_of_q_mod_z)}
          ${triCell(r.f_sigma)}${triCell(r.test_topology_open)}${triCell(r.metric_topology_open)}</tr>
    </table>
    <table>
      <tr><th>cardinality</th><th>metric discrete</th><th>Haar measure</th><th>torsion subgroup</th><th>torsion dense</th></tr>
      <tr><td>${r.cardinality === "aleph0" ? "ℵ₀" : r.cardinality === "continuum" ? "𝔠" : "?"}</td>
          ${triCell(r.metric_topology_discrete)}
          <td>${r.measure_zero ? "zero" : "?"}</td>
          <td>${r.torsion.rendering.replaceAll("inf", "∞")}</td>
          <td>${r.torsion_dense ? "yes" : "?"}</td></tr>
    </table>`;
}

function showMember() {
  const out = JSON.parse(member_json($("seq").value.trim(), $("point").value.trim()));
  const el = $("member-out");
  if (out.error) { el.innerHTML = `<pre>${out.error}</pre>`; return; }
  const cls = out.decision === "in" ? "yes" : out.decision === "out" ? "no" : "unknown";
  const digits = out.digit_preview.length
    ? `<tr><th>digit preview c₁…</th><td>${out.digit_preview.join(", ")} …</td></tr>` : "";
  const rho = out.rho.exact !== undefined
    ? `exactly ${out.rho.exact}`
    : `in [${out.rho.lo}, ${out.rho.hi}] (certified)`;
  el.innerHTML = `
    <table>
      <tr><th>decision</th><td class="${cls}">${out.decision}</td></tr>
      <tr><th>certificate</th><td><code>${out.certificate}</code></td></tr>
      ${digits}
      <tr><th>ρ<sub>u</sub>(x, 0)</th><td>${rho}</td></tr>
    </table>`;
}

function drawBall(out) {
  const canvas = $("circle");
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height;
  const cx = w / 2, cy = h / 2, R = Math.min(w, h) / 2 - 28;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#ccd";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.arc(cx, cy, R, 0, 2 * Math.PI);
  ctx.stroke();
  // Faint full grid when small enough to see.
  const grid = out.grid_size_float;
  if (grid <= 4096) {
    ctx.fillStyle = "#dde2ec";
    for (let k = 0; k < grid; k++) {
      const th = 2 * Math.PI * (k / grid) - Math.PI / 2;
      ctx.beginPath();
      ctx.arc(cx + R * Math.cos(th), cy + R * Math.sin(th), 1.2, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  // Ball members.
  ctx.fillStyle = "#0f4c81";
  for (const frac of out.angles_approx) {
    const th = 2 * Math.PI * frac - Math.PI / 2;
    ctx.beginPath();
    ctx.arc(cx + R * Math.cos(th), cy + R * Math.sin(th), 4, 0, 2 * Math.PI);
    ctx.fill();
  }
  // Mark zero.
  ctx.strokeStyle = "#b42318";
  ctx.beginPath();
  ctx.arc(cx, cy - R, 7, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.fillStyle = "#667";
  ctx.font = "12px system-ui";
  ctx.fillText("0", cx - 3, cy - R - 12);
}

function showBall() {
  const out = JSON.parse(ball_json(
    $("seq").value.trim(),
    Number($("resolution").value),
    $("eps").value.trim(),
    $("closed").value === "closed",
  ));
  const el = $("ball-summary");
  if (out.error) { el.innerHTML = `<pre>${out.error}</pre>`; return; }
  const shown = out.points.slice(0, 12).join(", ");
  const more = out.count > 12 ? `, … (${out.count} total)` : "";
  const radii = JSON.parse(trivial_radius_json($("seq").value.trim()));
  const hint = radii.bounded
    ? ` Trivial below ε = ${radii.trivial_radius}; the sphere sits at ${radii.sphere_radius}.`
    : "";
  el.innerHTML = `<p><span class="count">${out.count}</span> of ${out.grid_size} grid points
    inside the ${out.closed ? "closed" : "open"} ball of radius ${out.radius}:
    <code>${shown}${more}</code>.${hint}</p>`;
  drawBall(out);
}

async function main() {
  await init();
  renderPresets($("presets"), SEQ_PRESETS, "seq");
  renderPresets($("point-presets"), POINT_PRESETS, "point");
  $("run-classify").addEventListener("click", showClassify);
  $("run-member").addEventListener("click", showMember);
  $("run-ball").addEventListener("click", showBall);
  showClassify();
  showBall();
}

main();

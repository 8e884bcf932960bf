import init, { Playground, task_ids, action_names, explore_match, score_text } from "./pkg/iglu_web_demo.js";

// cell codes 1..6
const COLORS = ["#fff", "#2b5fd9", "#3a9a3a", "#d23b2b", "#e8892a", "#8b46c1", "#e6d23a"];
const CELL = 30;
const KEYS = {
  w: 1, s: 2, d: 3, a: 4,
  ArrowUp: 5, ArrowDown: 6, ArrowLeft: 7, ArrowRight: 8,
  " ": 9, q: 10, e: 11,
  1: 12, 2: 13, 3: 14, 4: 15, 5: 16, 6: 17,
};

const $ = (id) => document.getElementById(id);
let game = null;

function draw() {
  const s = JSON.parse(game.state());
  const y = Number($("layer").value);
  $("layer-label").textContent = y;
  const ctx = $("world").getContext("2d");
  const rows = s.layers[y].split("/");
  ctx.clearRect(0, 0, 330, 330);
  for (let z = 0; z < 11; z++) {
    for (let x = 0; x < 11; x++) {
      ctx.fillStyle = COLORS[Number(rows[z][x])];
      ctx.fillRect(x * CELL, z * CELL, CELL, CELL);
    }
  }
  // target outline on this layer
  ctx.lineWidth = 2;
  for (const [x, ty, z] of s.target) {
    if (ty !== y) continue;
    ctx.strokeStyle = "#000";
    ctx.setLineDash([4, 3]);
    ctx.strokeRect(x * CELL + 3, z * CELL + 3, CELL - 6, CELL - 6);
  }
  ctx.setLineDash([]);
  for (const [x, my, z] of s.matched) {
    if (my !== y) continue;
    ctx.fillStyle = "#000";
    ctx.fillText("✓", x * CELL + 11, z * CELL + 19);
  }
  if (s.place_at && s.place_at[1] === y) {
    ctx.strokeStyle = "#f0f";
    ctx.strokeRect(s.place_at[0] * CELL + 1, s.place_at[2] * CELL + 1, CELL - 2, CELL - 2);
  }
  const [px, py, pz, yaw] = s.pose;
  if (Math.floor(py) === y || Math.floor(py) + 1 === y) {
    const cx = px * CELL, cz = pz * CELL, r = (yaw * Math.PI) / 180;
    ctx.fillStyle = "#222";
    ctx.beginPath();
    ctx.arc(cx, cz, 7, 0, 2 * Math.PI);
    ctx.fill();
    ctx.strokeStyle = "#222";
    ctx.beginPath();
    ctx.moveTo(cx, cz);
    ctx.lineTo(cx - 14 * Math.sin(r), cz + 14 * Math.cos(r));
    ctx.stroke();
  }
  $("status").textContent =
    `step ${s.step_index}  match ${s.max_match}/${s.target_blocks}  reward ${s.episode_reward}` +
    `${s.done ? "  (done)" : ""}\ninventory ${s.inventory.join(" ")}\n` +
    `instruction: ${s.instruction ?? "-"}\n\n${$("status").dataset.last ?? ""}`;
}

function act(code) {
  if (!game) return;
  try {
    const r = JSON.parse(game.step(code));
    $("status").dataset.last = `${r.action}: ${r.reward.value} ${r.reward.cause}` +
      (r.info.blocked ? ` (blocked: ${r.info.blocked})` : "");
  } catch (e) {
    $("status").dataset.last = String(e.message ?? e);
  }
  draw();
}

function reset() {
  game = new Playground($("task").value, Number($("seed").value));
  $("status").dataset.last = "";
  draw();
}

await init();

for (const id of JSON.parse(task_ids())) {
  $("task").add(new Option(id, id));
}
for (const [code, name] of JSON.parse(action_names())) {
  const b = document.createElement("button");
  b.textContent = name;
  b.onclick = () => act(code);
  $("actions").append(b);
}
$("reset").onclick = reset;
$("layer").oninput = draw;
document.addEventListener("keydown", (ev) => {
  if (ev.target.tagName === "TEXTAREA" || ev.target.tagName === "INPUT") return;
  if (ev.key in KEYS) {
    ev.preventDefault();
    act(KEYS[ev.key]);
  }
});

$("explore").onclick = () => {
  try {
    $("match-out").textContent = JSON.stringify(JSON.parse(explore_match($("built").value, $("target").value)), null, 1);
  } catch (e) {
    $("match-out").textContent = String(e.message ?? e);
  }
};
$("score").onclick = () => {
  $("score-out").textContent = JSON.stringify(JSON.parse(score_text($("cand").value, $("ref").value)), null, 1);
};

reset();

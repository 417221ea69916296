import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";

import { DuelApi } from "./api";
import { Board } from "./board";
import { DuelController } from "./controller";
import { buildScene, ghostMesh, setGhost, syncScene } from "./scene";
import type { Cell, GameView } from "./types";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8000";

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
};

const api = new DuelApi(SERVICE_URL);
let pendingCell: Cell | null = null;
let orientation = 0;

const controller = new DuelController(api, {
  onView: (view) => render(view),
  onError: (message) => toast(message),
});

const board = new Board(el("board"), {
  onHover: (cell) => {
    if (cell) void showGhost(cell);
    else if (!pendingCell) setGhost(three, null);
  },
  onPick: (cell) => void stage(cell),
});

// --- three.js viewport -----------------------------------------------------

const viewport = el<HTMLDivElement>("viewport");
const renderer = new THREE.WebGLRenderer({ antialias: true });
renderer.setPixelRatio(devicePixelRatio);
viewport.appendChild(renderer.domElement);

const camera = new THREE.PerspectiveCamera(46, 1, 0.1, 500);
const three = buildScene([10, 10, 10]);
let controls = new OrbitControls(camera, renderer.domElement);

function frameBin(bin: [number, number, number]): void {
  camera.position.set(bin[0] * 1.9, bin[2] * 1.6, bin[1] * 2.2);
  controls.target.set(bin[0] / 2, bin[2] / 3, bin[1] / 2);
  controls.update();
}

function resize(): void {
  const { clientWidth, clientHeight } = viewport;
  renderer.setSize(clientWidth, clientHeight);
  camera.aspect = clientWidth / clientHeight;
  camera.updateProjectionMatrix();
}
addEventListener("resize", resize);

function animate(): void {
  requestAnimationFrame(animate);
  controls.update();
  renderer.render(three.scene, camera);
}

// --- game flow ---------------------------------------------------------------

async function showGhost(cell: Cell): Promise<void> {
  const view = controller.view;
  if (!view.current_item || view.done) return;
  const preview = await controller.preview(cell);
  if (!preview) return;
  setGhost(
    three,
    ghostMesh(preview.item, cell.x, cell.y, preview.z, cell.orientation),
  );
}

/** First click stages the move (ghost stays put); the confirm button commits. */
async function stage(cell: Cell): Promise<void> {
  pendingCell = cell;
  board.setHighlight(cell);
  await showGhost(cell);
  el("confirm").removeAttribute("disabled");
}

async function confirm(): Promise<void> {
  if (!pendingCell) return;
  const cell = pendingCell;
  clearStaged();
  const result = await controller.commit(cell);
  if (result) toast(`+${result.reward.toFixed(3)} (${result.reward_exact})`);
}

function clearStaged(): void {
  pendingCell = null;
  board.setHighlight(null);
  setGhost(three, null);
  el("confirm").setAttribute("disabled", "");
}

async function hint(): Promise<void> {
  const cell = await controller.hint();
  if (!cell) {
    toast("no placement left");
    return;
  }
  orientation = cell.orientation;
  syncOrientationButtons(controller.view);
  board.setOrientation(orientation);
  await stage(cell);
}

function render(view: GameView): void {
  clearStaged();
  syncScene(three, view);
  frameBin(view.bin);
  board.update(view);
  board.setOrientation(orientation);

  el("game-id").textContent = view.game_id;
  el("seed").textContent = `seed ${view.seed}`;
  const position = view.done ? view.human.items : view.human.items + 1;
  el("progress").textContent = `item ${position} / ${view.sequence_length}`;
  el("human-items").textContent = String(view.human.items);
  el("human-uti").textContent = `${(view.human.utilization * 100).toFixed(1)}%`;
  el("ai-items").textContent = String(view.ai.items);
  el("ai-uti").textContent = `${(view.ai.utilization * 100).toFixed(1)}%`;

  const next = el("next-item");
  next.textContent = view.current_item
    ? `${view.current_item[0]} x ${view.current_item[1]} x ${view.current_item[2]}`
    : view.done
      ? "—"
      : "?";
  el("status").textContent = view.done
    ? view.human.utilization > view.ai.utilization
      ? "done — you beat the machine"
      : view.human.utilization === view.ai.utilization
        ? "done — dead heat"
        : "done — the machine wins this one"
    : "pick a circle, then confirm";
  syncOrientationButtons(view);
}

function syncOrientationButtons(view: GameView): void {
  const holder = el("orientations");
  const count = view.mask?.length ?? 1;
  holder.classList.toggle("hidden", count < 2);
  if (orientation >= count) orientation = 0;
  for (const button of Array.from(holder.querySelectorAll("button"))) {
    const value = Number(button.dataset.orientation);
    button.classList.toggle("active", value === orientation);
    button.onclick = () => {
      orientation = value;
      clearStaged();
      board.setOrientation(orientation);
      syncOrientationButtons(view);
    };
  }
}

let toastTimer = 0;
function toast(message: string): void {
  const node = el("toast");
  node.textContent = message;
  node.classList.add("visible");
  clearTimeout(toastTimer);
  toastTimer = window.setTimeout(() => node.classList.remove("visible"), 2600);
}

async function newGame(): Promise<void> {
  const raw = el<HTMLInputElement>("seed-input").value.trim();
  const swapLw = el<HTMLInputElement>("swap-input").checked;
  const seed = raw === "" ? Math.floor(Math.random() * 1_000_000) : Number(raw);
  if (!Number.isInteger(seed) || seed < 0) {
    toast("seed must be a non-negative integer");
    return;
  }
  orientation = 0;
  await controller.start({ seed, swapLw });
}

el("new-game").addEventListener("click", () => void newGame());
el("reset").addEventListener("click", () => {
  if (controller.active) void controller.reset();
});
el("hint").addEventListener("click", () => {
  if (controller.active) void hint();
});
el("confirm").addEventListener("click", () => void confirm());

async function boot(): Promise<void> {
  resize();
  animate();
  try {
    await api.health();
  } catch {
    toast(`service unreachable at ${SERVICE_URL} — start it with: binpack3d serve`);
    return;
  }
  await newGame();
}

void boot();

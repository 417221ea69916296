import * as THREE from "three";

import type { GameView, PackedBox } from "./types";
import { footprint } from "./circles";

/** Engine coordinates are (x east, y north, z up); three.js is y-up.  Every
 *  mesh placed here maps engine (x, y, z) to scene (x, z, y). */

const BOX_PALETTE = [
  0x4e79a7, 0xf28e2b, 0x59a14f, 0xe15759, 0x76b7b2, 0xedc948, 0xb07aa1,
  0xff9da7, 0x9c755f, 0xbab0ac,
];

export function boxColor(index: number): number {
  return BOX_PALETTE[index % BOX_PALETTE.length];
}

export function binWireframe(bin: [number, number, number]): THREE.LineSegments {
  const [l, w, h] = bin;
  const geometry = new THREE.BoxGeometry(l, h, w);
  geometry.translate(l / 2, h / 2, w / 2);
  const edges = new THREE.EdgesGeometry(geometry);
  geometry.dispose();
  const lines = new THREE.LineSegments(
    edges,
    new THREE.LineBasicMaterial({ color: 0x666666 }),
  );
  lines.name = "bin";
  return lines;
}

export function boxMesh(box: PackedBox, index: number): THREE.Mesh {
  const geometry = new THREE.BoxGeometry(box.l, box.h, box.w);
  const material = new THREE.MeshLambertMaterial({ color: boxColor(index) });
  const mesh = new THREE.Mesh(geometry, material);
  mesh.position.set(box.x + box.l / 2, box.z + box.h / 2, box.y + box.w / 2);
  mesh.name = `box-${index}`;
  return mesh;
}

/** Translucent stand-in shown while the player is picking a cell.  Dims come
 *  from the raw item plus the chosen orientation, the resting height from the
 *  server preview. */
export function ghostMesh(
  item: [number, number, number],
  x: number,
  y: number,
  z: number,
  orientation: number,
): THREE.Mesh {
  const [l, w] = footprint(item, orientation);
  const h = item[2];
  const geometry = new THREE.BoxGeometry(l, h, w);
  const material = new THREE.MeshLambertMaterial({
    color: 0xffffff,
    transparent: true,
    opacity: 0.55,
  });
  const mesh = new THREE.Mesh(geometry, material);
  mesh.position.set(x + l / 2, z + h / 2, y + w / 2);
  mesh.name = "ghost";
  return mesh;
}

/** The item waiting to be placed floats beside the bin, red-edged so it reads
 *  as "not in the bin yet". */
export function pendingItemMesh(
  item: [number, number, number],
  bin: [number, number, number],
): THREE.Group {
  const [l, w, h] = item;
  const geometry = new THREE.BoxGeometry(l, h, w);
  const material = new THREE.MeshLambertMaterial({ color: 0xdddddd });
  const mesh = new THREE.Mesh(geometry, material);
  const edges = new THREE.LineSegments(
    new THREE.EdgesGeometry(geometry),
    new THREE.LineBasicMaterial({ color: 0xcc2222 }),
  );
  const group = new THREE.Group();
  group.add(mesh);
  group.add(edges);
  group.position.set(bin[0] + 4 + l / 2, h / 2, w / 2);
  group.name = "pending";
  return group;
}

export interface SceneState {
  scene: THREE.Scene;
  boxes: THREE.Group;
  overlay: THREE.Group;
}

export function buildScene(bin: [number, number, number]): SceneState {
  const scene = new THREE.Scene();
  scene.background = new THREE.Color(0x10141a);
  scene.add(binWireframe(bin));

  const ambient = new THREE.AmbientLight(0xffffff, 0.7);
  const sun = new THREE.DirectionalLight(0xffffff, 1.4);
  sun.position.set(bin[0] * 1.5, bin[2] * 2.5, bin[1] * 1.2);
  scene.add(ambient);
  scene.add(sun);

  const floor = new THREE.Mesh(
    new THREE.PlaneGeometry(bin[0], bin[1]),
    new THREE.MeshLambertMaterial({ color: 0x1b222c, side: THREE.DoubleSide }),
  );
  floor.rotation.x = -Math.PI / 2;
  floor.position.set(bin[0] / 2, -0.01, bin[1] / 2);
  scene.add(floor);

  const boxes = new THREE.Group();
  boxes.name = "boxes";
  scene.add(boxes);
  const overlay = new THREE.Group();
  overlay.name = "overlay";
  scene.add(overlay);
  return { scene, boxes, overlay };
}

function clearGroup(group: THREE.Group): void {
  for (const child of [...group.children]) {
    group.remove(child);
    if (child instanceof THREE.Mesh || child instanceof THREE.LineSegments) {
      child.geometry.dispose();
      const material = child.material;
      if (Array.isArray(material)) material.forEach((m) => m.dispose());
      else material.dispose();
    }
  }
}

/** Rebuild the packed-box group and the floating pending item from a view. */
export function syncScene(state: SceneState, view: GameView): void {
  clearGroup(state.boxes);
  view.packed.forEach((box, index) => state.boxes.add(boxMesh(box, index)));
  const pending = state.scene.getObjectByName("pending");
  if (pending) state.scene.remove(pending);
  if (view.current_item && !view.done) {
    state.scene.add(pendingItemMesh(view.current_item, view.bin));
  }
}

export function setGhost(
  state: SceneState,
  ghost: THREE.Mesh | null,
): void {
  clearGroup(state.overlay);
  if (ghost) state.overlay.add(ghost);
}

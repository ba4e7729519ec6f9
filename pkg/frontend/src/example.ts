/**
 * Example: a two-lesion ground truth where one lesion is 100x larger.
 *
 * The volume-aware loss weights each ground-truth voxel by 1/sqrt(lesion
 * volume), so the training signal for missing the single-voxel lesion is
 * 10x stronger per voxel than for the large one. Run `npm run example`.
 */

import { cross_entropy, soft_dice, va_dice } from "./loss.js";

const shape = [12, 5, 5] as const;
const n = shape[0] * shape[1] * shape[2];

const g = new Uint8Array(n);
const at = (x: number, y: number, z: number) => (x * shape[1] + y) * shape[2] + z;
g[at(0, 0, 0)] = 1; // volume-1 lesion
for (let x = 2; x < 6; x++) {
  for (let y = 0; y < 5; y++) {
    for (let z = 0; z < 5; z++) g[at(x, y, z)] = 1; // 100-voxel lesion
  }
}

const perfect = Float64Array.from(g);
const missingSmall = Float64Array.from(g);
missingSmall[at(0, 0, 0)] = 0.0;
const missingOneLarge = Float64Array.from(g);
missingOneLarge[at(3, 2, 2)] = 0.0;

console.log("two-lesion example: volumes 1 and 100, weights 1.0 and 0.1\n");
for (const [name, p] of [
  ["perfect prediction", perfect],
  ["small lesion missed", missingSmall],
  ["one large-lesion voxel missed", missingOneLarge],
] as const) {
  const va = va_dice(p, g, shape);
  const sd = soft_dice(p, g, shape);
  const ce = cross_entropy(p, g, shape);
  console.log(
    `${name.padEnd(30)} va=${va.value.toFixed(6)}  soft=${sd.value.toFixed(6)}  ce=${ce.value.toFixed(6)}`
  );
}

const va = va_dice(perfect, g, shape);
console.log(`\ngradient shape matches input: ${va.gradient.length} === ${n}`);
const gSmall = va.gradient[at(0, 0, 0)];
const gLarge = va.gradient[at(3, 2, 2)];
console.log(`gradient at small-lesion voxel ${gSmall.toExponential(3)}, large-lesion voxel ${gLarge.toExponential(3)}`);

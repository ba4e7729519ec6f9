export { soft_dice, va_dice, cross_entropy, DEFAULT_EPSILON, DEFAULT_NUMERATOR_CONSTANT } from "./loss.js";
export type { LossOptions, LossResult, ProbArray } from "./loss.js";
export { labelComponents, weightMap, connectivityOffsets } from "./components.js";
export type { ComponentMap, Connectivity, Shape3 } from "./components.js";
export { pairwiseSum } from "./pairwiseSum.js";
export { portableLog } from "./portableLog.js";
export { readRaw, writeRaw } from "./rawFormat.js";
export type { RawVolume, RawDtype } from "./rawFormat.js";

/**
 * 3D connected components over flat boolean masks and the derived
 * inverse-sqrt-volume weight map.
 *
 * Component partitions must agree exactly with the Python library for
 * every connectivity (the weight values feed the bit-exact loss parity);
 * the adjacency definitions below are the standard 6/18/26 voxel
 * neighborhoods.
 */

export type Connectivity = 6 | 18 | 26;
export type Shape3 = readonly [number, number, number];

export function connectivityOffsets(conn: Connectivity): Array<[number, number, number]> {
  const out: Array<[number, number, number]> = [];
  for (let dx = -1; dx <= 1; dx++) {
    for (let dy = -1; dy <= 1; dy++) {
      for (let dz = -1; dz <= 1; dz++) {
        if (dx === 0 && dy === 0 && dz === 0) continue;
        const manhattan = Math.abs(dx) + Math.abs(dy) + Math.abs(dz);
        if (conn === 6 && manhattan > 1) continue;
        if (conn === 18 && manhattan > 2) continue;
        out.push([dx, dy, dz]);
      }
    }
  }
  return out;
}

export interface ComponentMap {
  ids: Int32Array; // 0 = background, 1..K in raster-first-encounter order
  volumes: Float64Array; // voxel counts indexed by component id; volumes[0] = 0
  count: number;
}

/** Label components of a flat (x-major) boolean mask by breadth-first fill. */
export function labelComponents(mask: Uint8Array, shape: Shape3, conn: Connectivity = 26): ComponentMap {
  const [nx, ny, nz] = shape;
  const n = nx * ny * nz;
  if (mask.length !== n) {
    throw new RangeError(`mask length ${mask.length} does not match shape ${nx}x${ny}x${nz}`);
  }
  const ids = new Int32Array(n);
  const offsets = connectivityOffsets(conn);
  const volumes: number[] = [0];
  const queue = new Int32Array(n);
  let next = 0;
  for (let idx = 0; idx < n; idx++) {
    if (!mask[idx] || ids[idx] !== 0) continue;
    next += 1;
    let head = 0;
    let tail = 0;
    queue[tail++] = idx;
    ids[idx] = next;
    let volume = 0;
    while (head < tail) {
      const cur = queue[head++];
      volume += 1;
      const z = cur % nz;
      const y = ((cur - z) / nz) % ny;
      const x = (cur - z - y * nz) / (ny * nz);
      for (const [dx, dy, dz] of offsets) {
        const xx = x + dx;
        const yy = y + dy;
        const zz = z + dz;
        if (xx < 0 || xx >= nx || yy < 0 || yy >= ny || zz < 0 || zz >= nz) continue;
        const nb = (xx * ny + yy) * nz + zz;
        if (mask[nb] && ids[nb] === 0) {
          ids[nb] = next;
          queue[tail++] = nb;
        }
      }
    }
    volumes.push(volume);
  }
  return { ids, volumes: Float64Array.from(volumes), count: next };
}

/** Per-voxel weights 1/sqrt(V_component), 0 on background. */
export function weightMap(comp: ComponentMap): Float64Array {
  const perComponent = new Float64Array(comp.count + 1);
  for (let j = 1; j <= comp.count; j++) {
    perComponent[j] = 1.0 / Math.sqrt(comp.volumes[j]);
  }
  const w = new Float64Array(comp.ids.length);
  for (let i = 0; i < w.length; i++) {
    w[i] = perComponent[comp.ids[i]];
  }
  return w;
}

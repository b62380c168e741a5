/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_rollout_free: (a: number, b: number) => void;
export const __wbg_room_free: (a: number, b: number) => void;
export const __wbg_tour_free: (a: number, b: number) => void;
export const rollout_dt: (a: number) => number;
export const rollout_objective: (a: number) => [number, number];
export const rollout_omega: (a: number) => [number, number];
export const rollout_table: (a: number) => [number, number];
export const rollout_theta: (a: number) => [number, number];
export const room_height: (a: number) => number;
export const room_is_free: (a: number, b: number, c: number) => number;
export const room_new: (a: number) => number;
export const room_resolution: (a: number) => number;
export const room_rollout: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => number;
export const room_tour: (a: number, b: number, c: number, d: number, e: number) => number;
export const room_uncertainty: (a: number, b: number, c: number, d: number) => [number, number];
export const room_walls: (a: number) => [number, number];
export const room_width: (a: number) => number;
export const tour_cost: (a: number) => number;
export const tour_order: (a: number) => [number, number];
export const tour_path: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;

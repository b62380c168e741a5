/* tslint:disable */
/* eslint-disable */

/**
 * One closed-loop rollout; series are sampled every controller period.
 */
export class Rollout {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    dt(): number;
    objective(): Float64Array;
    omega(): Float64Array;
    /**
     * The uncertainty table the rollout used, normalised by its empty-direction value.
     */
    table(): Float64Array;
    /**
     * Motor angle wrapped to `[0, 2pi)`.
     */
    theta(): Float64Array;
}

/**
 * A walled floor plan, extruded between a floor and a ceiling slab.
 */
export class Room {
    free(): void;
    [Symbol.dispose](): void;
    height(): number;
    is_free(x: number, y: number): boolean;
    /**
     * `preset` 0: L-shaped corridor; 1: hall with pillars; 2: two rooms joined by a door.
     */
    constructor(preset: number);
    resolution(): number;
    /**
     * Runs the receding-horizon scan controller for `seconds` with the sensor held at `(x, y)`
     * and a single frontier of `intensity` cells at `(tx, ty)`.
     */
    rollout(x: number, y: number, tx: number, ty: number, intensity: number, seconds: number): Rollout | undefined;
    /**
     * Orders `stops` (flattened `x, y` pairs) into an open tour from `(sx, sy)` that minimises
     * travel time along 8-connected free cells of the floor slice.
     */
    tour(sx: number, sy: number, stops: Float64Array): Tour;
    /**
     * Localization cost at `n_c` motor angles for a sensor at `(x, y)`, divided by the
     * empty-direction cost. Empty when the position is inside a wall.
     */
    uncertainty(x: number, y: number, n_c: number): Float64Array;
    /**
     * Occupancy of the sensor-height slice, row-major from `y = 0`; 1 for walls.
     */
    walls(): Uint8Array;
    width(): number;
}

/**
 * Visiting order and the geodesic polyline through the stops.
 */
export class Tour {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Travel time at cruise speed (s); infinite when a stop cannot be reached.
     */
    cost(): number;
    /**
     * Stop indices in visiting order (input order, zero-based).
     */
    order(): Uint32Array;
    /**
     * Flattened `x, y` pairs from the start through every stop.
     */
    path(): Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_rollout_free: (a: number, b: number) => void;
    readonly __wbg_room_free: (a: number, b: number) => void;
    readonly __wbg_tour_free: (a: number, b: number) => void;
    readonly rollout_dt: (a: number) => number;
    readonly rollout_objective: (a: number) => [number, number];
    readonly rollout_omega: (a: number) => [number, number];
    readonly rollout_table: (a: number) => [number, number];
    readonly rollout_theta: (a: number) => [number, number];
    readonly room_height: (a: number) => number;
    readonly room_is_free: (a: number, b: number, c: number) => number;
    readonly room_new: (a: number) => number;
    readonly room_resolution: (a: number) => number;
    readonly room_rollout: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => number;
    readonly room_tour: (a: number, b: number, c: number, d: number, e: number) => number;
    readonly room_uncertainty: (a: number, b: number, c: number, d: number) => [number, number];
    readonly room_walls: (a: number) => [number, number];
    readonly room_width: (a: number) => number;
    readonly tour_cost: (a: number) => number;
    readonly tour_order: (a: number) => [number, number];
    readonly tour_path: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;

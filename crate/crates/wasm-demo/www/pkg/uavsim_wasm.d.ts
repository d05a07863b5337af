/* tslint:disable */
/* eslint-disable */

/**
 * Runs one scenario given as `key = value` lines.
 *
 * Returns the headline metrics, the sensor grid, per-sensor delivered
 * packets and the UAV trajectory as `[t, x, y, z]` points.
 */
export function simulate(config: string): string;

/**
 * Throughput and pooled delay against sensor count, for Basic access and
 * RTS/CTS, on top of the scenario in `config`. `counts` is a comma list.
 */
export function sweep_sensors(config: string, counts: string): string;

/**
 * Samples a UAV trajectory every `step` seconds without running the network.
 *
 * `model` is `gauss_markov`, `random_direction_2d` or `constant_position`.
 */
export function trajectory(model: string, speed: number, alpha: number, seed: bigint, duration: number, step: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly simulate: (a: number, b: number) => [number, number];
    readonly sweep_sensors: (a: number, b: number, c: number, d: number) => [number, number];
    readonly trajectory: (a: number, b: number, c: number, d: number, e: bigint, f: number, g: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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

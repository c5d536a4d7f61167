/* tslint:disable */
/* eslint-disable */

/**
 * JSON test error and hybrid rollout of `expr`.
 */
export function evaluate(system: string, expr: string): string;

/**
 * JSON Pareto front of a brute-force search up to `max_nodes` nodes.
 */
export function search(system: string, max_nodes: number): string;

/**
 * JSON train/test trajectories sampled every `dt`.
 */
export function simulate(system: string, dt: number): string;

/**
 * JSON array of the built-in systems.
 */
export function systems(): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly evaluate: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly search: (a: number, b: number, c: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number) => [number, number, number, number];
    readonly systems: () => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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

/* tslint:disable */
/* eslint-disable */

/**
 * Plurisubharmonicity defect of `−(−r)^δ` on a collar of the canonical
 * defining function, at `steps` values of δ in `(0, 1)`.
 */
export function defect_curve(name: string, params: string, base_points: number, steps: number): string;

/**
 * Registered domains and their parameters.
 */
export function domains(): string;

/**
 * Smallest Levi eigenvalue at sampled boundary points, with `log|z1|²`
 * and `|z2|` for plotting.
 */
export function levi_scan(name: string, params: string, count: number, seed: bigint): string;

/**
 * Annulus oracle for `steps + 1` windings in `[0, beta_max]`, with the
 * continuum value `2βt0/π` and the index `1/(1+n)`.
 */
export function oracle_curve(beta_max: number, t0: number, m: number, steps: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly defect_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly domains: () => [number, number];
    readonly levi_scan: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number];
    readonly oracle_curve: (a: number, b: number, c: number, d: number) => [number, number];
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

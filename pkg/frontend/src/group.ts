// The two prime-order groups, with encodings matching the services:
// p256 points as 33-byte compressed SEC1 (hex on the wire), the brute-
// forceable group as decimal strings. Scalar multiplication on p256 goes
// through @noble/curves; the toy group is plain BigInt modular powers.

import { p256 } from "@noble/curves/nist.js";
import { bytesToHex, hexToBytes, utf8 } from "./wire.js";

export type GroupId = "toy" | "p256";

export interface Group {
  id: GroupId;
  order: bigint;
  generatorWire: string;
  // decode + membership-check a wire string; returns a normalized wire string
  checkWire(wire: string): string;
  scalarMul(wire: string, k: bigint): string;
  pointBytes(wire: string): Uint8Array;
  inverse(k: bigint): bigint;
  randomScalar(loExclusive: bigint, rng: Rng): bigint;
}

export interface Rng {
  randomBytes(n: number): Uint8Array;
}

export const webcryptoRng: Rng = {
  randomBytes(n: number): Uint8Array {
    const out = new Uint8Array(n);
    crypto.getRandomValues(out);
    return out;
  },
};

function modPow(base: bigint, exp: bigint, mod: bigint): bigint {
  let result = 1n;
  let b = base % mod;
  let e = exp;
  while (e > 0n) {
    if (e & 1n) result = (result * b) % mod;
    b = (b * b) % mod;
    e >>= 1n;
  }
  return result;
}

function modInverse(k: bigint, n: bigint): bigint {
  let [oldR, r] = [((k % n) + n) % n, n];
  let [oldS, s] = [1n, 0n];
  while (r !== 0n) {
    const q = oldR / r;
    [oldR, r] = [r, oldR - q * r];
    [oldS, s] = [s, oldS - q * s];
  }
  if (oldR !== 1n) throw new Error(`${k} has no inverse mod ${n}`);
  return ((oldS % n) + n) % n;
}

function uniformScalar(loExclusive: bigint, order: bigint, rng: Rng): bigint {
  const span = order - loExclusive - 1n;
  if (span <= 0n) throw new Error("empty scalar range");
  const bytes = Math.ceil((span.toString(2).length + 64) / 8);
  const raw = rng.randomBytes(bytes);
  let acc = 0n;
  for (const b of raw) acc = (acc << 8n) | BigInt(b);
  return loExclusive + 1n + (acc % span);
}

const TOY_MODULUS = 2039n;
const TOY_ORDER = 1019n;
const TOY_GENERATOR = 2n;

export const toyGroup: Group = {
  id: "toy",
  order: TOY_ORDER,
  generatorWire: TOY_GENERATOR.toString(),
  checkWire(wire: string): string {
    if (!/^[0-9]+$/.test(wire)) throw new Error(`not a toy element: ${wire}`);
    const v = BigInt(wire);
    if (v < 1n || v >= TOY_MODULUS || modPow(v, TOY_ORDER, TOY_MODULUS) !== 1n) {
      throw new Error(`${wire} is not in the toy subgroup`);
    }
    return v.toString();
  },
  scalarMul(wire: string, k: bigint): string {
    const v = BigInt(this.checkWire(wire));
    if (k < 0n || k >= TOY_ORDER) throw new Error(`scalar ${k} out of range`);
    return modPow(v, k, TOY_MODULUS).toString();
  },
  pointBytes(wire: string): Uint8Array {
    return utf8(this.checkWire(wire));
  },
  inverse(k: bigint): bigint {
    return modInverse(k, TOY_ORDER);
  },
  randomScalar(loExclusive: bigint, rng: Rng): bigint {
    return uniformScalar(loExclusive, TOY_ORDER, rng);
  },
};

export const p256Group: Group = {
  id: "p256",
  order: p256.Point.Fn.ORDER,
  generatorWire: bytesToHex(p256.Point.BASE.toBytes(true)),
  checkWire(wire: string): string {
    const pt = p256.Point.fromHex(wire); // validates curve membership
    return bytesToHex(pt.toBytes(true));
  },
  scalarMul(wire: string, k: bigint): string {
    const pt = p256.Point.fromHex(wire);
    if (k <= 0n || k >= p256.Point.Fn.ORDER) throw new Error(`scalar ${k} out of range`);
    return bytesToHex(pt.multiply(k).toBytes(true));
  },
  pointBytes(wire: string): Uint8Array {
    return hexToBytes(this.checkWire(wire));
  },
  inverse(k: bigint): bigint {
    return modInverse(k, p256.Point.Fn.ORDER);
  },
  randomScalar(loExclusive: bigint, rng: Rng): bigint {
    return uniformScalar(loExclusive, p256.Point.Fn.ORDER, rng);
  },
};

export function groupById(id: string): Group {
  if (id === "toy") return toyGroup;
  if (id === "p256") return p256Group;
  throw new Error(`unknown group ${id}`);
}

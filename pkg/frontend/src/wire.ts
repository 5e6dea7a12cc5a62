// Shared wire types and byte helpers. The JSON wire form is
// {"content": {...}, "sig": "<base64>"}; signatures always cover the
// canonical byte encoding, never the JSON text.

export interface WireArtifact {
  content: Record<string, unknown>;
  sig: string;
}

export interface CertContent {
  id_rp: string;
  endpoint: string;
  supplementary: Record<string, string>;
}

export interface RegistrationResultContent {
  status: "OK" | "Fail";
  pid_rp: string;
  nonce: string;
  validity: number;
}

export interface TokenContent {
  pid_rp: string;
  pid_u: string;
  issuer: string;
  validity: number;
  attributes: Record<string, string>;
}

export function hexToBytes(hex: string): Uint8Array {
  if (hex.length % 2 !== 0 || /[^0-9a-fA-F]/.test(hex)) {
    throw new Error(`bad hex: ${hex}`);
  }
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}

export function bytesToHex(data: Uint8Array): string {
  return Array.from(data, (b) => b.toString(16).padStart(2, "0")).join("");
}

export function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const raw = atob(b64);
    const out = new Uint8Array(raw.length);
    for (let i = 0; i < raw.length; i++) out[i] = raw.charCodeAt(i);
    return out;
  }
  return new Uint8Array(Buffer.from(b64, "base64"));
}

export function utf8(s: string): Uint8Array {
  return new TextEncoder().encode(s);
}

export function concatBytes(...parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const p of parts) {
    out.set(p, offset);
    offset += p.length;
  }
  return out;
}

export function originOf(url: string): string {
  return new URL(url).origin;
}

// WebCrypto-backed hashing and issuer signature verification.

import { base64ToBytes, bytesToHex, utf8 } from "./wire.js";

export async function sha256Hex(data: Uint8Array | string): Promise<string> {
  const bytes = typeof data === "string" ? utf8(data) : data;
  const digest = await crypto.subtle.digest("SHA-256", bytes as BufferSource);
  return bytesToHex(new Uint8Array(digest));
}

export async function importIssuerKey(pem: string): Promise<CryptoKey> {
  const body = pem
    .replace("-----BEGIN PUBLIC KEY-----", "")
    .replace("-----END PUBLIC KEY-----", "")
    .replace(/\s+/g, "");
  const der = base64ToBytes(body);
  return crypto.subtle.importKey(
    "spki",
    der as BufferSource,
    { name: "RSASSA-PKCS1-v1_5", hash: "SHA-256" },
    false,
    ["verify"],
  );
}

export async function verifySignature(
  key: CryptoKey,
  payload: Uint8Array,
  sigBase64: string,
): Promise<boolean> {
  let sig: Uint8Array;
  try {
    sig = base64ToBytes(sigBase64);
  } catch {
    return false;
  }
  return crypto.subtle.verify(
    "RSASSA-PKCS1-v1_5",
    key,
    sig as BufferSource,
    payload as BufferSource,
  );
}

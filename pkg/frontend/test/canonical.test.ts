import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  certContentBytes,
  registrationContentBytes,
  tokenContentBytes,
} from "../src/canonical.js";
import { importIssuerKey, sha256Hex, verifySignature } from "../src/crypto.js";
import { p256Group, toyGroup } from "../src/group.js";
import { bytesToHex } from "../src/wire.js";

const fixtures = JSON.parse(readFileSync("fixtures/fixtures.json", "utf8"));

describe("canonical encoding parity", () => {
  it("matches the service bytes for the certificate", () => {
    const bytes = certContentBytes(fixtures.toy.cert.content, toyGroup);
    expect(bytesToHex(bytes)).toBe(fixtures.toy.cert_canonical_hex);
  });

  it("matches the service bytes for the registration result", () => {
    const bytes = registrationContentBytes(
      fixtures.toy.registration_result.content, toyGroup);
    expect(bytesToHex(bytes)).toBe(fixtures.toy.registration_result_canonical_hex);
  });

  it("matches the service bytes for the identity token", () => {
    const bytes = tokenContentBytes(fixtures.toy.token.content, toyGroup);
    expect(bytesToHex(bytes)).toBe(fixtures.toy.token_canonical_hex);
  });

  it("matches the service bytes with p256 point encodings", () => {
    const bytes = certContentBytes(fixtures.p256.cert.content, p256Group);
    expect(bytesToHex(bytes)).toBe(fixtures.p256.cert_canonical_hex);
  });
});

describe("issuer signature verification", () => {
  it("accepts every fixture artifact", async () => {
    const key = await importIssuerKey(fixtures.issuer_public_key_pem);
    const cases: Array<[Uint8Array, string]> = [
      [certContentBytes(fixtures.toy.cert.content, toyGroup), fixtures.toy.cert.sig],
      [registrationContentBytes(fixtures.toy.registration_result.content, toyGroup),
       fixtures.toy.registration_result.sig],
      [tokenContentBytes(fixtures.toy.token.content, toyGroup), fixtures.toy.token.sig],
      [certContentBytes(fixtures.p256.cert.content, p256Group), fixtures.p256.cert.sig],
    ];
    for (const [payload, sig] of cases) {
      expect(await verifySignature(key, payload, sig)).toBe(true);
    }
  });

  it("rejects any field mutation", async () => {
    const key = await importIssuerKey(fixtures.issuer_public_key_pem);
    const tampered = {
      ...fixtures.toy.token.content,
      attributes: { ...fixtures.toy.token.content.attributes, admin: "true" },
    };
    const payload = tokenContentBytes(tampered, toyGroup);
    expect(await verifySignature(key, payload, fixtures.toy.token.sig)).toBe(false);

    const wrongValidity = { ...fixtures.toy.token.content,
                            validity: fixtures.toy.token.content.validity + 1 };
    expect(await verifySignature(
      key, tokenContentBytes(wrongValidity, toyGroup), fixtures.toy.token.sig,
    )).toBe(false);
  });

  it("hashes the trapdoor like the services do", async () => {
    expect(await sha256Hex(String(fixtures.toy.trapdoor)))
      .toBe(fixtures.toy.nonce_of_trapdoor);
  });
});

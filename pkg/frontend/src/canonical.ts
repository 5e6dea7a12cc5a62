// Canonical byte encoding of signed artifact content, byte-identical to
// the service side: tag then length-prefixed fields (4-byte BE lengths),
// strings UTF-8, integers 8-byte BE, string maps count-prefixed in sorted
// key order, group elements via their group encoding.

import { Group } from "./group.js";
import {
  CertContent,
  RegistrationResultContent,
  TokenContent,
  concatBytes,
  hexToBytes,
  utf8,
} from "./wire.js";

const TAG_CERT = "rp-certificate/v1";
const TAG_REGISTRATION = "pid-registration-result/v1";
const TAG_TOKEN = "identity-token/v1";

function piece(raw: Uint8Array): Uint8Array {
  const len = new Uint8Array(4);
  new DataView(len.buffer).setUint32(0, raw.length, false);
  return concatBytes(len, raw);
}

function encStr(s: string): Uint8Array {
  return piece(utf8(s));
}

function encInt(v: number | bigint): Uint8Array {
  const out = new Uint8Array(8);
  new DataView(out.buffer).setBigUint64(0, BigInt(v), false);
  return piece(out);
}

function encMap(m: Record<string, string>): Uint8Array {
  const keys = Object.keys(m).sort();
  const count = new Uint8Array(4);
  new DataView(count.buffer).setUint32(0, keys.length, false);
  const parts: Uint8Array[] = [count];
  for (const k of keys) {
    parts.push(encStr(k), encStr(m[k]));
  }
  return piece(concatBytes(...parts));
}

export function certContentBytes(content: CertContent, group: Group): Uint8Array {
  return concatBytes(
    encStr(TAG_CERT),
    piece(group.pointBytes(content.id_rp)),
    encStr(content.endpoint),
    encMap(content.supplementary),
  );
}

export function registrationContentBytes(
  content: RegistrationResultContent,
  group: Group,
): Uint8Array {
  return concatBytes(
    encStr(TAG_REGISTRATION),
    encStr(content.status),
    piece(group.pointBytes(content.pid_rp)),
    piece(hexToBytes(content.nonce)),
    encInt(content.validity),
  );
}

export function tokenContentBytes(content: TokenContent, group: Group): Uint8Array {
  return concatBytes(
    encStr(TAG_TOKEN),
    piece(group.pointBytes(content.pid_rp)),
    piece(group.pointBytes(content.pid_u)),
    encStr(content.issuer),
    encInt(content.validity),
    encMap(content.attributes),
  );
}

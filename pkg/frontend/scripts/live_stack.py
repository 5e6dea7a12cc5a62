"""Boot a toy-group issuer + RP pair for the frontend live test.

Prints one JSON line with connection details and the expected account,
then serves until stdin closes.
"""

import json
import sys

from blindsso.stack import boot_stack


def main() -> None:
    stack = boot_stack("toy", num_rps=1, users={"livetest": "live-pw"})
    uid = stack.idp.passwords.verify("livetest", "live-pw").user_id
    expected = stack.params.scalar_mul(stack.rps[0].id_rp.point, uid.value).wire()
    print(json.dumps({
        "idp_url": stack.idp_url,
        "rp_url": stack.rp_urls[0],
        "username": "livetest",
        "password": "live-pw",
        "expected_account": expected,
        "group": "toy",
    }), flush=True)
    try:
        sys.stdin.read()
    finally:
        stack.stop()


if __name__ == "__main__":
    main()

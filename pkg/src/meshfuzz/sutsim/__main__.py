"""Run one simulated component as a standalone process.

Launch contract (environment):
    MCCM_REGION   path of the shared coverage region file
    MCCM_LISTEN   TCP port to serve the component protocol on
    MCCM_CHANNEL  channel id (must match the region header)

    SUTSIM_ROLE          entry | manager | registry | config
    SUTSIM_HOST          bind address (default 127.0.0.1)
    SUTSIM_DEFECTS       comma-separated defect ids, e.g. "D1,D2,D3"
    SUTSIM_CRASH_LOG     crash log file path
    SUTSIM_DOWNSTREAM_A  host:port of the session manager (entry only)
    SUTSIM_DOWNSTREAM_B  host:port of the registry (entry only)
    SUTSIM_DOWNSTREAM_C  host:port of the config store (entry only)
"""

import os
import sys

from meshfuzz.mccm.region import Region
from meshfuzz.sutsim.component import ROLE_CLASSES, SocketLink
from meshfuzz.sutsim.defects import parse_defect_set


def _addr(env_key: str) -> tuple[str, int]:
    host, port = os.environ[env_key].rsplit(":", 1)
    return host, int(port)


def main() -> int:
    role = os.environ["SUTSIM_ROLE"]
    if role not in ROLE_CLASSES:
        print(f"unknown role {role!r}", file=sys.stderr)
        return 2
    region = Region(os.environ["MCCM_REGION"])
    port = int(os.environ["MCCM_LISTEN"])
    host = os.environ.get("SUTSIM_HOST", "127.0.0.1")
    defects = parse_defect_set(os.environ.get("SUTSIM_DEFECTS", ""))
    crash_log = os.environ.get("SUTSIM_CRASH_LOG")

    cls = ROLE_CLASSES[role]
    if role == "entry":
        links = {key: SocketLink(*_addr(f"SUTSIM_DOWNSTREAM_{key.upper()}"))
                 for key in ("a", "b", "c")}
        component = cls(region, links, defects=defects, crash_log=crash_log)
    else:
        component = cls(region, defects=defects, crash_log=crash_log)
    component.serve_forever(host, port)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Standard deployment of the simulated target.

Builds the launch specs for the entry component plus its three downstreams
(with per-component coverage regions, collectors, and crash logs under one
working directory) and ships the initial corpus.
"""

import os
import socket
import sys
from dataclasses import dataclass

from meshfuzz.coverage import ChannelSet, ChannelSpec
from meshfuzz.mccm.controller import CollectorEndpoint
from meshfuzz.mccm.launcher import ComponentLaunchSpec
from meshfuzz.mutation import MessageSequence
from meshfuzz.sutsim import tlv

ROLES = (
    ("entry", 0),
    ("manager", 1),
    ("registry", 2),
    ("config", 3),
)

N_CHANNELS = len(ROLES)


def pick_free_port(host: str = "127.0.0.1") -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind((host, 0))
        return sock.getsockname()[1]


@dataclass
class TargetDeployment:
    workdir: str
    host: str
    specs: list[ComponentLaunchSpec]
    entry_port: int
    entry_region: str
    collector_endpoints: list[CollectorEndpoint]
    crash_logs: dict[str, str]

    @property
    def downstream_endpoints(self) -> list[CollectorEndpoint]:
        return [ep for ep in self.collector_endpoints if ep.channel_id != 0]


def build_deployment(workdir: str, size_m: int, defects: str = "",
                     host: str = "127.0.0.1",
                     collect_timeout_ms: int = 250) -> TargetDeployment:
    os.makedirs(workdir, exist_ok=True)
    regions_dir = os.path.join(workdir, "regions")
    logs_dir = os.path.join(workdir, "logs")
    os.makedirs(regions_dir, exist_ok=True)
    os.makedirs(logs_dir, exist_ok=True)

    ports = {name: pick_free_port(host) for name, _ in ROLES}
    collector_ports = {name: pick_free_port(host) for name, _ in ROLES}
    regions = {name: os.path.join(regions_dir, f"{name}.cov") for name, _ in ROLES}
    crash_logs = {name: os.path.join(logs_dir, f"{name}.crash") for name, _ in ROLES}

    common_env = {
        "SUTSIM_HOST": host,
        "SUTSIM_DEFECTS": defects,
        "SUTSIM_DOWNSTREAM_A": f"{host}:{ports['manager']}",
        "SUTSIM_DOWNSTREAM_B": f"{host}:{ports['registry']}",
        "SUTSIM_DOWNSTREAM_C": f"{host}:{ports['config']}",
    }

    specs = []
    endpoints = []
    for name, channel_id in ROLES:
        env = dict(common_env)
        env["SUTSIM_ROLE"] = name
        env["SUTSIM_CRASH_LOG"] = crash_logs[name]
        specs.append(ComponentLaunchSpec(
            name=name, channel_id=channel_id,
            argv=[sys.executable, "-m", "meshfuzz.sutsim"],
            region_path=regions[name], size_m=size_m,
            listen_host=host, listen_port=ports[name],
            collector_port=collector_ports[name],
            crash_log=crash_logs[name], env=env, log_dir=logs_dir))
        endpoints.append(CollectorEndpoint(
            channel_id=channel_id, host=host, port=collector_ports[name],
            region_name=regions[name], timeout_ms=collect_timeout_ms))

    return TargetDeployment(
        workdir=workdir, host=host, specs=specs,
        entry_port=ports["entry"], entry_region=regions["entry"],
        collector_endpoints=endpoints, crash_logs=crash_logs)


def build_channel_set(alphas: tuple[float, ...],
                      deployment: TargetDeployment | None = None) -> ChannelSet:
    channels = []
    for (name, channel_id), alpha in zip(ROLES, alphas):
        address = None
        if deployment is not None:
            ep = deployment.collector_endpoints[channel_id]
            address = (ep.host, ep.port)
        channels.append(ChannelSpec(channel_id, name, alpha, address))
    return ChannelSet(channels)


def shipped_seeds() -> list[MessageSequence]:
    """Initial corpus: one valid registration, one registration plus a
    valid session setup."""
    register = tlv.pack_tlv(tlv.MSG_REGISTER, bytes([0x01]) + b"ue01")
    setup = tlv.pack_tlv(tlv.MSG_SETUP, bytes([0x01, 0x12, 0x34, 0x10]))
    return [
        MessageSequence([register], origin="initial-corpus"),
        MessageSequence([register, setup], origin="initial-corpus"),
    ]

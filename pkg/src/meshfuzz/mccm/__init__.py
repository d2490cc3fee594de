"""Coverage collection machinery: wire frames, shared regions, the
per-component collector service, the fan-out controller, and the process
launcher/monitor."""

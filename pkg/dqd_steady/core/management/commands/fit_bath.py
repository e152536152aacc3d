# dqd_steady/core/management/commands/fit_bath.py
import json

from core.management.config_command import ConfigCommand
from core.services.kernels import build_metadata, cache_dir, load_or_fit
from core.services.model import Method


class Command(ConfigCommand):
    help = "Fit the spectral envelope and the weak, C11 and C22 kernels; cache the artifacts."

    def run(self, cfg, **options):
        p = cfg.params
        settings = cfg.fit_settings()
        fits = load_or_fit(p, settings, cfg.fit_dir, tuple(Method))
        metadata = build_metadata(p, fits, settings)
        self.stdout.write(self.style.SUCCESS(f"fit artifacts: {cache_dir(cfg.fit_dir, p, settings)}"))
        self.stdout.write(json.dumps(metadata, sort_keys=True, indent=2))

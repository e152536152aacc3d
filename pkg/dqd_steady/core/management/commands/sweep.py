# dqd_steady/core/management/commands/sweep.py
from core.management.config_command import ConfigCommand
from core.rules.comparison import compare_methods
from core.services.kernels import load_or_fit
from core.services.model import resonance_bias
from core.services.steady_sweep import asymmetry_report, sweep, sweep_frame, write_csv


class Command(ConfigCommand):
    help = "Steady-state right-dot population over the bias grid, one CSV row per (epsilon, method)."

    def run(self, cfg, **options):
        p = cfg.params
        methods = cfg.methods
        fits = load_or_fit(p, cfg.fit_settings(), cfg.fit_dir, methods)
        rows = sweep(p, cfg.eps_grid(), methods, cfg.workers, fits, cfg.solver_settings())
        write_csv(sweep_frame(rows), cfg.output_path)
        self.stdout.write(self.style.SUCCESS(f"{len(rows)} rows written to {cfg.output_path}"))

        eps_star = resonance_bias(p)
        for method in methods:
            own = [row for row in rows if row.method is method]
            unconverged = sum(1 for row in own if not row.result.converged)
            negative = sum(1 for row in own if row.result.positivity_violation)
            report = asymmetry_report(
                own, eps_star, cfg.asym_inner, cfg.asym_outer, cfg.shoulder_slope_fraction,
                cfg.shoulder_run, cfg.shoulder_baseline_factor,
            )
            line = f"{method.value}: unconverged={unconverged} negative_eigenvalue={negative}"
            if report.applicable:
                line += (f" blue_mean={report.blue_mean:.6f} red_mean={report.red_mean:.6f}"
                         f" shoulder={'yes' if report.shoulder_detected else 'no'}")
            else:
                line += " asymmetry=not-applicable"
            self.stdout.write(self.style.WARNING(line) if negative else line)

        if len(methods) > 1:
            comparison = compare_methods(rows)
            self.stdout.write(f"max |M0_weak - M0_polaron| = {comparison['max_difference']:.6f}")

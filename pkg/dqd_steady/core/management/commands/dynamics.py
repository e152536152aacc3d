# dqd_steady/core/management/commands/dynamics.py
from core.exceptions import ConfigurationError
from core.management.config_command import ConfigCommand
from core.services.kernels import load_or_fit
from core.services.model import RHO_LEFT, RHO_RIGHT
from core.services.steady_sweep import build_solver, write_csv

INITIAL_STATES = {"left": RHO_LEFT, "right": RHO_RIGHT}


class Command(ConfigCommand):
    help = "Integrate one trajectory at the configured bias and write it as CSV."

    def add_command_arguments(self, parser):
        parser.add_argument("--t_end", type=float, default=None,
                            help="final time in units of 1/omega0 (default: 10 drive periods)")
        parser.add_argument("--samples", type=int, default=1001)
        parser.add_argument("--rho0", choices=sorted(INITIAL_STATES), default="left")
        parser.add_argument("--output", default=None, help="CSV path (default: output_path)")

    def run(self, cfg, **options):
        methods = cfg.methods
        if len(methods) != 1:
            raise ConfigurationError("dynamics integrates one method: set method to weak or polaron",
                                     keys=["method"])
        p = cfg.params
        t_end = options["t_end"] if options["t_end"] is not None else 10 * p.period
        if t_end <= 0 or options["samples"] < 2:
            raise ConfigurationError("t_end must be positive and samples at least 2",
                                     keys=["t_end", "samples"])
        fits = load_or_fit(p, cfg.fit_settings(), cfg.fit_dir, methods)
        solver = build_solver(p, methods[0], fits, cfg.solver_settings())
        trajectory = solver.integrate(INITIAL_STATES[options["rho0"]], t_end, options["samples"])
        output = options["output"] or cfg.output_path
        write_csv(trajectory.to_frame(), output)
        self.stdout.write(self.style.SUCCESS(
            f"{methods[0].value}: {len(trajectory.times)} samples written to {output}; "
            f"final population_right={trajectory.population_right[-1]:.10f}, "
            f"max trace defect={trajectory.max_trace_defect:.2e}, "
            f"max hermiticity defect={trajectory.max_herm_defect:.2e}"
        ))

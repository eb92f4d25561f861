"""Command line entry point: ``check``, ``run`` and ``demo-paper``.

Exit status: 0 on success (for ``run``: every agent settled within the
tolerance), 1 when a run did not settle or a check failed, 2 on an unusable
scenario file.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .abstraction import build_certificate, build_interface
from .controllers import ControllerKind, StaticCertificate
from .errors import ConsensusError, InvalidScenario, ParseError, ValidationError
from .export import atomic_write_text, write_metrics_json, write_trajectory_csv
from .graph import (
    Digraph,
    SwitchingSchedule,
    is_balanced,
    is_strongly_connected,
    is_undirected_connected,
)
from .plant import default_observer_poles, observer_gain, validate_plant
from .scenario import (
    Scenario,
    demo_scenario,
    demo_plants,
    scenario_from_dict,
    scenario_to_dict,
    validate_scenario,
)
from .simulator import run

EXIT_OK, EXIT_UNSETTLED, EXIT_INVALID = 0, 1, 2


def _fmt_array(a) -> str:
    return np.array2string(np.asarray(a), precision=6, suppress_small=True, separator=", ").replace("\n", "")


def _load_dict(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}", str(path)) from None
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from None


def check_report(s: Scenario) -> tuple[list[str], bool]:
    """Human-readable pass/fail table for every agent and graph, plus synthesized gains."""
    lines = []
    ok = True
    mark = lambda flag: "pass" if flag else "FAIL"  # noqa: E731
    lines.append(f"scenario: {s.name or '(unnamed)'}  agents: {s.n_agents}  controller: {s.controller.value}")
    for k, p in enumerate(s.plants):
        rep = validate_plant(p)
        ok &= rep.admissible
        lines.append(
            f"agent {k + 1} {p.name}: n={p.n} controllable={mark(rep.controllable)} "
            f"observable={mark(rep.observable)} check_no_origin_zero={mark(rep.no_origin_zero)}"
        )
        for m in rep.messages:
            lines.append(f"    ! {m}")
        if not rep.admissible:
            continue
        iface = build_interface(p, s.poles[k], s.R[k])
        cert = build_certificate(iface)
        r_reg, r_out = iface.residuals()
        lines.append(f"    X={_fmt_array(iface.X[:, 0])} U={iface.U:.6g} k={_fmt_array(iface.k[0])} R={iface.R:.6g}")
        lines.append(f"    residuals |AX+bU|={r_reg:.2e} |cX-1|={r_out:.2e}")
        oposes = s.observer_poles[k] if s.observer_poles[k] is not None else default_observer_poles(p.n)
        lines.append(f"    l={_fmt_array(observer_gain(p.A, p.c, oposes)[:, 0])}")
        lines.append(
            f"    certificate c_hat={cert.c_hat:.6g} alpha_rate={cert.alpha_rate:.6g} "
            f"gamma_coeff={cert.gamma_coeff:.6g} eig(P)={_fmt_array(np.linalg.eigvalsh(cert.P))}"
        )
        if s.static[k] is not None:
            st = s.static[k]
            lines.append(f"    static nu={st.nu:.6g} lambda_hat={st.lambda_hat:.6g} k_static={st.gain:.6g}")
    for k, g in enumerate(s.schedule.graphs):
        if g.n != s.n_agents:
            lines.append(f"graph {k + 1}: FAIL node count {g.n} != {s.n_agents}")
            ok = False
            continue
        sc, bal = is_strongly_connected(g), is_balanced(g)
        ok &= sc and bal
        lines.append(
            f"graph {k + 1}: strongly_connected={mark(sc)} balanced={mark(bal)} "
            f"undirected_connected={'yes' if is_undirected_connected(g) else 'no'}"
        )
    failures = validate_scenario(s)
    for check, msg in failures:
        lines.append(f"[{check}] {msg}")
    ok &= not failures
    lines.append("result: " + ("pass" if ok else "FAIL"))
    return lines, ok


def cmd_check(path, out=None) -> int:
    out = out or sys.stdout
    try:
        s = scenario_from_dict(_load_dict(path), validate=False)
    except ParseError as exc:
        print(f"error: {exc}", file=out)
        return EXIT_INVALID
    lines, ok = check_report(s)
    print("\n".join(lines), file=out)
    return EXIT_OK if ok else EXIT_UNSETTLED


def _emit_run(s: Scenario, out_dir: Path, tag: str = "", out=None) -> int:
    out = out or sys.stdout
    traj, metrics = run(s)
    suffix = f"_{tag}" if tag else ""
    traj_name = s.outputs.get("trajectory", "trajectory.csv")
    met_name = s.outputs.get("metrics", "metrics.json")
    if suffix:
        traj_name = Path(traj_name).stem + suffix + Path(traj_name).suffix
        met_name = Path(met_name).stem + suffix + Path(met_name).suffix
    write_trajectory_csv(traj, out_dir / traj_name)
    write_metrics_json(metrics, out_dir / met_name, controller=s.controller.value, scenario_hash=traj.scenario_hash)
    status = "settled" if metrics.settled else "NOT settled"
    print(
        f"{tag or s.controller.value}: {status} (settling_time={metrics.settling_time}, "
        f"max|e(t_final)|={max(metrics.final_errors):.3e}, drift={metrics.max_sum_drift:.2e}, "
        f"bound_violations={metrics.bound_violations}) -> {out_dir / traj_name}",
        file=out,
    )
    return EXIT_OK if metrics.settled else EXIT_UNSETTLED


def cmd_run(path, dt=None, tfinal=None, controller=None, out_dir="out", stride=None, out=None) -> int:
    out = out or sys.stdout
    try:
        s = scenario_from_dict(_load_dict(path), validate=False)
        changes = {}
        if dt is not None:
            changes["dt"] = float(dt)
        if tfinal is not None:
            changes["t_final"] = float(tfinal)
        if controller is not None:
            changes["controller"] = ControllerKind(controller)
        if stride is not None:
            changes["stride"] = int(stride)
        s = replace(s, **changes)
        failures = validate_scenario(s)
        if failures:
            raise ValidationError(failures)
        return _emit_run(s, Path(out_dir), out=out)
    except InvalidScenario as exc:
        print(f"error: {exc}", file=out)
        return EXIT_INVALID


DEMO_README = """\
Four-agent switching demo
=========================

Agents 1, 2 and 4 use the printed system matrices.  Agent 3 keeps the printed
A3 and b3 but its output row is corrected to c3 = [0, 1, 1]: with the printed
c3 = [0, 1, 0] the matrix [[A3, b3], [c3, 0]] is singular (its first row and
its last row coincide), so A X + b U = 0, c X = 1 has no solution.  With the
correction X3 = (0, 0, 1) and U3 = -1.  Run `demo-paper --printed-agent3` to
see the printed agent rejected.

Topology: G1 (bidirected path 1-2-3-4) and G2 (ring 1->4->3->2->1, an arrow
j->i meaning that i receives from j), unit weights, active in the order
G1, G2, G1, ... for 5 time units each.

Gains are the default synthesis: state poles -1, ..., -n; observer poles
-2, ..., -2n; R = (b'b)^-1 b'X; observer initial state 0.

Files:
  scenario_<controller>.json    re-runnable scenario, `run` accepts it
  trajectory_<controller>.csv   t, y_1..y_N, z_1..z_N, e_1..e_N, u_1..u_N, v_1..v_N
  metrics_<controller>.json     final_errors, settling_time, max_sum_drift,
                                bound_violations, ave_y0
"""


def static_subdemo(dt, t_final) -> Scenario:
    """Agent 1 alone under the static output law with P = 2, nu = 2, lambda_hat = 2."""
    p = demo_plants()[0]
    return Scenario(
        plants=(p,),
        x0=(np.array([2.0]),),
        schedule=SwitchingSchedule.fixed(Digraph(np.zeros((1, 1)))),
        controller=ControllerKind.STATIC,
        static=(StaticCertificate(np.array([[2.0]]), 2.0, 2.0),),
        dt=dt,
        t_final=t_final,
        name="agent 1 static output feedback",
    )


def cmd_demo_paper(out_dir="demo_out", dt=1e-3, tfinal=40.0, controller=None, printed_agent3=False, stride=10, out=None) -> int:
    out = out or sys.stdout
    out_dir = Path(out_dir)
    if printed_agent3:
        s = demo_scenario(ControllerKind.STATE, printed_agent3=True, dt=dt, t_final=tfinal)
        failures = validate_scenario(s)
        print(f"error: {ValidationError(failures)}", file=out)
        return EXIT_INVALID
    if controller == "static":
        scenarios = [static_subdemo(dt, tfinal)]
    else:
        kinds = [ControllerKind(controller)] if controller else [ControllerKind.STATE, ControllerKind.OUTPUT]
        scenarios = [demo_scenario(k, dt=dt, t_final=tfinal, stride=stride) for k in kinds]
    atomic_write_text(out_dir / "README.md", DEMO_README)
    status = EXIT_OK
    for s in scenarios:
        tag = s.controller.value
        atomic_write_text(out_dir / f"scenario_{tag}.json", json.dumps(scenario_to_dict(s), indent=2) + "\n")
        status = max(status, _emit_run(s, out_dir, tag, out=out))
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twolevel-consensus", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="validate a scenario and print the synthesized gains")
    p_check.add_argument("file")

    p_run = sub.add_parser("run", help="simulate a scenario and write trajectory CSV + metrics JSON")
    p_run.add_argument("file")
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--tfinal", type=float)
    p_run.add_argument("--controller", choices=[k.value for k in ControllerKind])
    p_run.add_argument("--stride", type=int)
    p_run.add_argument("--out", default="out")

    p_demo = sub.add_parser("demo-paper", help="run the built-in four-agent switching example")
    p_demo.add_argument("--out", default="demo_out")
    p_demo.add_argument("--dt", type=float, default=1e-3)
    p_demo.add_argument("--tfinal", type=float, default=40.0)
    p_demo.add_argument("--controller", choices=[k.value for k in ControllerKind])
    p_demo.add_argument("--stride", type=int, default=10)
    p_demo.add_argument("--printed-agent3", action="store_true", help="use the printed (inadmissible) agent 3")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            return cmd_check(args.file)
        if args.command == "run":
            return cmd_run(args.file, args.dt, args.tfinal, args.controller, args.out, args.stride)
        return cmd_demo_paper(args.out, args.dt, args.tfinal, args.controller, args.printed_agent3, args.stride)
    except ConsensusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Write the PYPOWER IEEE test cases as MATPOWER-style .m files.

Usage: python3 tools/export_pypower_cases.py data/
"""
import sys
from pathlib import Path

from pypower import api

CASES = ["case9", "case14", "case30", "case57", "case118", "case300"]


def fmt(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def table(name, rows):
    lines = [f"mpc.{name} = ["]
    for r in rows:
        lines.append("\t" + "\t".join(fmt(v) for v in r) + ";")
    lines.append("];")
    return "\n".join(lines)


def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for name in CASES:
        c = getattr(api, name)()
        text = [
            f"function mpc = {name}",
            f"% {name} exported from PYPOWER",
            "mpc.version = '2';",
            f"mpc.baseMVA = {fmt(c['baseMVA'])};",
            "",
            "%% bus data",
            "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
            table("bus", c["bus"][:, :13]),
            "",
            "%% generator data",
            "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin",
            table("gen", c["gen"][:, :10]),
            "",
            "%% branch data",
            "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
            table("branch", c["branch"][:, :13]),
            "",
            "%% generator cost data",
            "%\t2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0",
            table("gencost", c["gencost"]),
            "",
        ]
        (out / f"{name}.m").write_text("\n".join(text))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data")

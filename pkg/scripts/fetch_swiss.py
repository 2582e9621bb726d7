"""Regenerate data/swiss.csv from R's ``datasets::swiss``.

Needs network access and statsmodels (which downloads from the Rdatasets
mirror).  Columns are renamed to the short forms used throughout the
package; row names (Swiss provinces) are dropped.
"""

import sys
from pathlib import Path

from statsmodels.datasets import get_rdataset

RENAME = {
    "Agriculture": "A",
    "Examination": "Ex",
    "Education": "Ed",
    "Catholic": "C",
    "Infant.Mortality": "IM",
}


def main(out="data/swiss.csv"):
    df = get_rdataset("swiss", "datasets").data.rename(columns=RENAME)
    df = df[["Fertility", "A", "Ex", "Ed", "C", "IM"]]
    if df.shape != (47, 6):
        raise SystemExit(f"unexpected shape {df.shape}")
    df.to_csv(Path(out), index=False, float_format="%.10g")
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])

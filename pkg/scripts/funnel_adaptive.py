"""Step-size-adaptive NUTS on the 10-d funnel (h=1/2, M=10, a_min=0.7).

    python scripts/funnel_adaptive.py --draws 50000 --out runs/funnel_adaptive
"""

from funnel_fixed import main

if __name__ == "__main__":
    main("funnel-adaptive", "runs/funnel_adaptive")

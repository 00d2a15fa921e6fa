"""
Counting words with a prescribed multiple average
=================================================

An independent check of the spectrum: count length-n words whose multiple
average is within eps of alpha, weight each by its cylinder length, and
solve the Moran equation.  Exact big-integer tables make the dynamic
program agree with brute force enumeration.
"""

from multiergodic import level_set_count, solve_critical, validate_spec
from multiergodic.oracle import count_table

spec = validate_spec({"q": 2, "intervals": [[0, 0.5], [0.5, 1]], "phi": [[0, 0], [0, 1]]})

dp = count_table(spec, 14, "dp")
brute = count_table(spec, 14, "exhaustive")
print("n=14 tables identical:", dp.counts == brute.counts, "total words:", dp.total)

print(f"{'alpha':>6} {'count (n=4096)':>16} {'moran':>9} {'dim':>9}")
for alpha in (0.1, 0.2, 0.25, 0.35, 0.5):
    count, moran = level_set_count(spec, 4096, alpha, 0.01)
    digits = len(str(count))
    print(f"{alpha:6.2f} {'~1e' + str(digits - 1):>16} {moran:9.5f} {solve_critical(spec, alpha).dim:9.5f}")

"""
Choosing the number of exemplars
================================

Clusters the observable customers for every k up to 8 and reads the
cluster count off the knee of the Hubert Gamma curve.
"""

# %%
from btm_disagg import demand_profiles, generate_synthetic_feeder, select_cluster_count, solar_profiles

ds = generate_synthetic_feeder(seed=0)
_, demand = demand_profiles(ds)
_, solar = solar_profiles(ds)

# %%
for name, profiles in (("demand", demand), ("solar", solar)):
    result = select_cluster_count(profiles, 8, seed=0)
    curve = "  ".join(f"k={k}: {g:.3f}" for k, g in sorted(result.gamma_curve.items()))
    print(f"{name:6s} -> k={result.k}\n   {curve}")

# %%
# The planted structure is four demand patterns and three panel orientations.
result = select_cluster_count(solar, 8, seed=0)
ids = list(ds.observed_pairs)
for c, members in result.members(ids).items():
    azimuths = sorted({ds.attributes[m]["azimuth"] for m in members})
    print(f"solar cluster {c}: {len(members)} PVs, azimuths {azimuths}")

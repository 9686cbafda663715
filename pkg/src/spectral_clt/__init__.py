"""Central limit theorem for adjacency spectral embeddings of random dot
product graphs: sampling, embedding, limiting covariances, clustering and
the experiments that exercise them."""
from ._version import __version__
from .clt import (
    ConditionalReport,
    ResidualReport,
    block_covariances,
    conditional_report,
    covariance_matrix,
    inside_ellipse,
    ks_normal_1d,
    ks_statistic,
    level_curve,
    mahalanobis_chisq_ks,
    pairwise_independence,
    residual_report,
    sigma2_one_dim,
)
from .cluster import (
    GaussianMixture,
    GaussianMixtureEM,
    KMeans,
    bayes_error,
    gmm_em,
    kmeans,
    misclassification,
)
from .embed import (
    AdjacencySpectralEmbedding,
    ConcentrationReport,
    Embedding,
    Upca,
    ase,
    concentration_bounds,
    concentration_report,
    upca,
)
from .exceptions import ConfigError, DomainError, NumericalError, SpectralCLTError
from .experiments import ExperimentConfig, load_config, run
from .linalg import EigenPairs, dense_symmetric_eigen, procrustes, spectral_norm, top_eigenpairs
from .model import (
    GraphSample,
    LatentDistribution,
    MomentSet,
    erdos_renyi_distribution,
    moments,
    read_graph,
    sample_graph,
    sbm_to_latent,
    write_graph,
)
from .rng import derive_rng, derive_seed

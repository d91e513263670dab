from .similarity import Basis, basis_vector, cosine_distance, distance_matrix

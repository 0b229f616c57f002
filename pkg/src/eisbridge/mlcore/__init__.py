from .metrics import mae, rmse, mape, pearson
from .kmeans import KMeans, KMeansResult, kmeans
from .tree import DecisionTreeRegressor
from .forest import RandomForestRegressor
from .grid_search import GridSearchCV, DEFAULT_FOREST_GRID
from .serialize import forest_to_doc, forest_from_doc, save_model, load_model

__all__ = [
    "mae",
    "rmse",
    "mape",
    "pearson",
    "KMeans",
    "KMeansResult",
    "kmeans",
    "DecisionTreeRegressor",
    "RandomForestRegressor",
    "GridSearchCV",
    "DEFAULT_FOREST_GRID",
    "forest_to_doc",
    "forest_from_doc",
    "save_model",
    "load_model",
]

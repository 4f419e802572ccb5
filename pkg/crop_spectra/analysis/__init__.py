# PCA and scatter graphics
